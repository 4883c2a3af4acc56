use sown_core::{qsup_of_placement, Placement, RateFunction};

/// Grid search over the simplex `Σd = L` for the best stability limit.
pub fn simplex_search(
    rate: &RateFunction,
    n: usize,
    length: f64,
    points: usize,
) -> (f64, Vec<f64>) {
    let cell = length / (points - 1) as f64;
    let mut best = (0.0, vec![]);
    let mut idx = vec![0usize; n - 1];
    loop {
        let used: usize = idx.iter().sum();
        if used < points {
            let mut d: Vec<f64> = idx.iter().map(|&k| k as f64 * cell).collect();
            let head: f64 = d.iter().sum();
            let last = length - head;
            if last >= -1e-9 {
                d.push(last.max(0.0));
                let p = Placement::with_length(d.clone(), length).unwrap();
                let q = qsup_of_placement(&p, rate).q_sup;
                if q > best.0 {
                    best = (q, d);
                }
            }
        }
        // odometer increment
        let mut pos = 0;
        loop {
            if pos == idx.len() {
                return best;
            }
            idx[pos] += 1;
            if idx[pos] < points {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}
