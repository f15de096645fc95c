//! Composite Gauss-Legendre quadrature.

use num_complex::Complex64;

// 10-point Gauss-Legendre rule on [-1, 1].
const NODES: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const WEIGHTS: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982_0,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

fn panel<T, F>(f: &F, a: f64, b: f64) -> T
where
    T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
    F: Fn(f64) -> T,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut acc = T::default();
    for (x, w) in NODES.iter().zip(WEIGHTS.iter()) {
        acc = acc + (f(c - h * x) + f(c + h * x)) * *w;
    }
    acc * h
}

/// Integrates `f` over `[a, b]`, splitting at `breaks` and into panels no wider than `max_width`.
pub fn integrate<T, F>(f: F, a: f64, b: f64, breaks: &[f64], max_width: f64) -> T
where
    T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
    F: Fn(f64) -> T,
{
    if !(b > a) {
        return T::default();
    }
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    cuts.push(a);
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = T::default();
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let panels = ((hi - lo) / max_width).ceil().max(1.0) as usize;
        let step = (hi - lo) / panels as f64;
        for p in 0..panels {
            let pa = lo + p as f64 * step;
            let pb = if p + 1 == panels { hi } else { pa + step };
            total = total + panel(&f, pa, pb);
        }
    }
    total
}

pub fn integrate_real<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, breaks: &[f64], max_width: f64) -> f64 {
    integrate(f, a, b, breaks, max_width)
}

pub fn integrate_complex<F: Fn(f64) -> Complex64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    max_width: f64,
) -> Complex64 {
    integrate(f, a, b, breaks, max_width)
}
