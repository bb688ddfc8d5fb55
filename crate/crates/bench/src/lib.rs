//! Workloads shared by the miner benchmarks.

use streamhm::synth::{act, and, generate, repeat, seq, xor, StreamPlan};
use streamhm::Event;

/// A loop of choices and a parallel block over twelve activities, with
/// enough concurrent cases to keep every queue busy.
pub fn workload(cases: usize, seed: u64) -> Vec<Event> {
    let spec = seq(vec![
        act("register"),
        repeat(
            xor(vec![
                (2.0, seq(vec![act("check"), act("review")])),
                (1.0, and(vec![act("ask"), act("wait"), act("call")])),
            ]),
            0.3,
        ),
        and(vec![act("price"), seq(vec![act("ship"), act("track")])]),
        xor(vec![(3.0, act("pay")), (1.0, act("reject"))]),
        act("close"),
    ]);
    generate(&StreamPlan::single(spec, cases, 20, seed)).expect("workload plan is valid")
}
