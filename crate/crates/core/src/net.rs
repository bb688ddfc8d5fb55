//! Stream source, stream client and log merger.
//!
//! The server replays a log to every client that connects, one thread per
//! client, in log order and paced by a fixed delay. Events travel as lines
//! (line codec) or as XES fragments separated by a blank line.

use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{decode_line, decode_xes_fragment, encode_line, encode_xes_fragment, Event};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Codec {
    #[default]
    Line,
    Xes,
}

impl fmt::Display for Codec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Codec::Line => "line",
            Codec::Xes => "xes",
        })
    }
}

impl FromStr for Codec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "line" => Ok(Codec::Line),
            "xes" => Ok(Codec::Xes),
            other => Err(Error::InvalidConfig(format!("unknown codec {other:?}"))),
        }
    }
}

impl Codec {
    /// Encodes one event including its delimiter.
    pub fn encode(self, event: &Event) -> String {
        match self {
            Codec::Line => {
                let mut line = encode_line(event);
                line.push('\n');
                line
            }
            Codec::Xes => {
                let mut fragment = encode_xes_fragment(event);
                fragment.push('\n');
                fragment
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSourceConfig {
    pub address: String,
    pub codec: Codec,
    /// Pause before each event; zero streams at full speed.
    pub inter_event_delay: Duration,
    /// Replay the log endlessly instead of closing after the last event.
    pub looping: bool,
    /// Stop accepting after this many clients and return once they finish.
    pub max_clients: Option<usize>,
}

impl StreamSourceConfig {
    pub fn new(address: impl Into<String>, codec: Codec) -> Self {
        StreamSourceConfig {
            address: address.into(),
            codec,
            inter_event_delay: Duration::ZERO,
            looping: false,
            max_clients: None,
        }
    }
}

pub struct StreamServer {
    listener: TcpListener,
    config: StreamSourceConfig,
    shutdown: Arc<AtomicBool>,
}

impl StreamServer {
    pub fn bind(config: StreamSourceConfig) -> Result<Self> {
        let listener = TcpListener::bind(&config.address)?;
        listener.set_nonblocking(true)?;
        Ok(StreamServer {
            listener,
            config,
            shutdown: Arc::new(AtomicBool::new(false)),
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    /// Flag that stops the accept loop and every client writer once set.
    pub fn shutdown_handle(&self) -> Arc<AtomicBool> {
        Arc::clone(&self.shutdown)
    }

    /// Serves `log` until shutdown or until `max_clients` clients are done.
    pub fn serve(self, log: &[Event]) -> Result<()> {
        let payload: Arc<Vec<Vec<u8>>> = Arc::new(
            log.iter()
                .map(|e| self.config.codec.encode(e).into_bytes())
                .collect(),
        );
        let mut workers = Vec::new();
        let mut accepted = 0usize;
        while !self.shutdown.load(Ordering::Relaxed) {
            if self.config.max_clients.is_some_and(|m| accepted >= m) {
                break;
            }
            match self.listener.accept() {
                Ok((stream, peer)) => {
                    accepted += 1;
                    log::info!("client {peer} connected");
                    let payload = Arc::clone(&payload);
                    let shutdown = Arc::clone(&self.shutdown);
                    let delay = self.config.inter_event_delay;
                    let looping = self.config.looping;
                    workers.push(thread::spawn(move || {
                        if let Err(e) = feed_client(stream, &payload, delay, looping, &shutdown) {
                            log::info!("client {peer} dropped: {e}");
                        }
                    }));
                }
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                    thread::sleep(Duration::from_millis(5));
                }
                Err(e) => return Err(e.into()),
            }
        }
        for w in workers {
            let _ = w.join();
        }
        Ok(())
    }
}

fn feed_client(
    stream: TcpStream,
    payload: &[Vec<u8>],
    delay: Duration,
    looping: bool,
    shutdown: &AtomicBool,
) -> std::io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    let mut out = BufWriter::new(stream);
    loop {
        for bytes in payload {
            if shutdown.load(Ordering::Relaxed) {
                return out.flush();
            }
            if !delay.is_zero() {
                out.flush()?;
                thread::sleep(delay);
            }
            out.write_all(bytes)?;
        }
        if !looping || payload.is_empty() {
            break;
        }
    }
    out.flush()
}

/// What the reader does with an undecodable event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OnDecodeError {
    Skip,
    #[default]
    Abort,
}

/// Iterator over the events of a byte stream; `seq_no` is the arrival index
/// among valid events.
pub struct EventReader<R> {
    input: R,
    codec: Codec,
    on_error: OnDecodeError,
    next_seq: u64,
    line_no: usize,
    failed: bool,
    warnings: Vec<String>,
}

impl<R: BufRead> EventReader<R> {
    pub fn new(input: R, codec: Codec, on_error: OnDecodeError) -> Self {
        EventReader {
            input,
            codec,
            on_error,
            next_seq: 0,
            line_no: 0,
            failed: false,
            warnings: Vec::new(),
        }
    }

    /// Messages for events skipped so far.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    fn next_line(&mut self) -> Option<std::io::Result<String>> {
        let mut line = String::new();
        match self.input.read_line(&mut line) {
            Ok(0) => None,
            Ok(_) => {
                self.line_no += 1;
                Some(Ok(line))
            }
            Err(e) => Some(Err(e)),
        }
    }

    /// Next raw record and the line it starts on.
    fn next_record(&mut self) -> Option<std::io::Result<(usize, String)>> {
        match self.codec {
            Codec::Line => loop {
                match self.next_line()? {
                    Ok(line) if line.trim().is_empty() => continue,
                    Ok(line) => return Some(Ok((self.line_no, line))),
                    Err(e) => return Some(Err(e)),
                }
            },
            Codec::Xes => {
                let mut fragment = String::new();
                let mut start = 0;
                loop {
                    match self.next_line() {
                        None => break,
                        Some(Err(e)) => return Some(Err(e)),
                        Some(Ok(line)) if line.trim().is_empty() => {
                            if !fragment.is_empty() {
                                break;
                            }
                        }
                        Some(Ok(line)) => {
                            if fragment.is_empty() {
                                start = self.line_no;
                            }
                            fragment.push_str(&line);
                        }
                    }
                }
                (!fragment.is_empty()).then_some(Ok((start, fragment)))
            }
        }
    }
}

impl<R: BufRead> Iterator for EventReader<R> {
    type Item = Result<Event>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            let (line_no, record) = match self.next_record()? {
                Ok(r) => r,
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e.into()));
                }
            };
            let decoded = match self.codec {
                Codec::Line => decode_line(&record).map(|e| Event { seq_no: self.next_seq, ..e }),
                Codec::Xes => decode_xes_fragment(&record, self.next_seq),
            };
            match decoded {
                Ok(event) => {
                    self.next_seq += 1;
                    return Some(Ok(event));
                }
                Err(e) if self.on_error == OnDecodeError::Skip => {
                    let msg = format!("line {line_no}: {e}");
                    log::warn!("skipping event at {msg}");
                    self.warnings.push(msg);
                }
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e));
                }
            }
        }
    }
}

/// Connects to a stream source.
pub fn read_stream(
    address: impl ToSocketAddrs,
    codec: Codec,
    on_error: OnDecodeError,
) -> Result<EventReader<BufReader<TcpStream>>> {
    let stream = TcpStream::connect(address)?;
    Ok(EventReader::new(BufReader::new(stream), codec, on_error))
}

/// Reads a whole line-codec file, failing on the first malformed line.
pub fn read_line_file(path: &Path) -> Result<Vec<Event>> {
    let file = std::fs::File::open(path)?;
    EventReader::new(BufReader::new(file), Codec::Line, OnDecodeError::Abort).collect()
}

pub fn write_line_file(path: &Path, events: &[Event]) -> Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    write_events(&mut out, events, Codec::Line)?;
    out.flush()?;
    Ok(())
}

pub fn write_events<W: Write>(out: &mut W, events: &[Event], codec: Codec) -> Result<()> {
    for e in events {
        out.write_all(codec.encode(e).as_bytes())?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeSpec {
    pub segments: Vec<Vec<Event>>,
    /// Overlap at each boundary; a single value applies to all of them.
    pub overlap: Vec<f64>,
}

impl MergeSpec {
    pub fn hard_shift(segments: Vec<Vec<Event>>) -> Self {
        MergeSpec {
            segments,
            overlap: vec![0.0],
        }
    }

    fn overlap_at(&self, boundary: usize) -> f64 {
        match self.overlap.as_slice() {
            [] => 0.0,
            [single] => *single,
            many => many[boundary],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::EmptyMerge);
        }
        let boundaries = self.segments.len() - 1;
        if self.overlap.len() > 1 && self.overlap.len() != boundaries {
            return Err(Error::InvalidConfig(format!(
                "{} overlap values for {boundaries} boundaries",
                self.overlap.len()
            )));
        }
        if let Some(p) = self.overlap.iter().find(|p| !(0.0..1.0).contains(*p)) {
            return Err(Error::InvalidConfig(format!("overlap must lie in [0, 1), got {p}")));
        }
        Ok(())
    }
}

/// Concatenates the segments. With overlap `p` the last `⌊p·n_k⌋` events of
/// segment `k` alternate with the first `⌊p·n_{k+1}⌋` events of segment
/// `k+1`, starting with segment `k`. Case ids already used by an earlier
/// segment get a `#k` suffix, and `seq_no` is renumbered from 0.
pub fn merge_logs(spec: &MergeSpec) -> Result<Vec<Event>> {
    spec.validate()?;
    let mut seen: HashSet<String> = HashSet::new();
    let mut merged: Vec<Event> = Vec::new();
    for (k, segment) in spec.segments.iter().enumerate() {
        let local: HashSet<&str> = segment.iter().map(|e| e.case_id.as_str()).collect();
        let rename: std::collections::HashMap<&str, String> = local
            .iter()
            .map(|&id| {
                let mut new_id = id.to_owned();
                while seen.contains(&new_id) {
                    new_id = format!("{new_id}#{k}");
                }
                (id, new_id)
            })
            .collect();
        seen.extend(rename.values().cloned());
        let renamed: Vec<Event> = segment
            .iter()
            .map(|e| Event::new(0, rename[e.case_id.as_str()].clone(), e.activity.clone()))
            .collect();

        if k == 0 {
            merged = renamed;
            continue;
        }
        let p = spec.overlap_at(k - 1);
        let prev_len = spec.segments[k - 1].len();
        let tail_len = ((p * prev_len as f64).floor() as usize).min(merged.len());
        let head_len = (p * renamed.len() as f64).floor() as usize;
        let mut tail: VecDeque<Event> = merged.split_off(merged.len() - tail_len).into();
        let mut rest: VecDeque<Event> = renamed.into();
        let mut head: VecDeque<Event> = rest.drain(..head_len).collect();
        while !tail.is_empty() || !head.is_empty() {
            if let Some(e) = tail.pop_front() {
                merged.push(e);
            }
            if let Some(e) = head.pop_front() {
                merged.push(e);
            }
        }
        merged.extend(rest);
    }
    for (i, e) in merged.iter_mut().enumerate() {
        e.seq_no = i as u64;
    }
    Ok(merged)
}
