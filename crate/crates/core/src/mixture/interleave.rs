/// Deterministic weighted round-robin over streams with fixed chunk counts.
///
/// At step `k` (1-based) the next chunk comes from the unfinished stream `i`
/// maximizing `k * n_i - emitted_i * T`, where `T = sum(n_i)`; ties go to
/// the lowest index. Every stream's emitted count stays within one chunk of
/// its proportional share `k * n_i / T` throughout the horizon.
#[derive(Debug, Clone)]
pub struct Interleaver {
    counts: Vec<u64>,
    emitted: Vec<u64>,
    total: u64,
    step: u64,
}

impl Interleaver {
    pub fn new(counts: Vec<u64>) -> Self {
        let total = counts.iter().sum();
        let emitted = vec![0; counts.len()];
        Self { counts, emitted, total, step: 0 }
    }

    pub fn emitted(&self) -> &[u64] {
        &self.emitted
    }
}

impl Iterator for Interleaver {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.step == self.total {
            return None;
        }
        self.step += 1;
        let k = u128::from(self.step);
        let total = u128::from(self.total);
        let mut best: Option<(usize, i128)> = None;
        for (i, (&n, &e)) in self.counts.iter().zip(&self.emitted).enumerate() {
            if e == n {
                continue;
            }
            let lag = (k * u128::from(n)) as i128 - (u128::from(e) * total) as i128;
            if best.is_none_or(|(_, b)| lag > b) {
                best = Some((i, lag));
            }
        }
        let (i, _) = best?;
        self.emitted[i] += 1;
        Some(i)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.total - self.step) as usize;
        (left, Some(left))
    }
}
