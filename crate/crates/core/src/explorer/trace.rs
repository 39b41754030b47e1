use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::kernel::{normalize, GlobalType};
use crate::semantics::{enabled_transitions, SemanticsOptions, Transition};

/// Random walk of at most `max_steps` steps, choosing uniformly among the
/// canonically ordered enabled transitions. Stops early in a stuck state.
pub fn sample_trace(g0: &GlobalType, seed: u64, max_steps: usize, opts: SemanticsOptions) -> Vec<Transition> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = normalize(g0);
    let mut trace = Vec::new();
    for _ in 0..max_steps {
        let mut ts = enabled_transitions(&g, opts).transitions;
        if ts.is_empty() {
            break;
        }
        let t = ts.swap_remove(rng.gen_range(0..ts.len()));
        g = t.successor.clone();
        trace.push(t);
    }
    trace
}
