#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spatial_transcoder::cost::{CostCoefficients, Problem, Term};
use spatial_transcoder::formats::{DecoderToSpeaker, EncodingMatrix};
use spatial_transcoder::geometry::{Direction, PointCloud, Speaker, SpeakerLayout};
use spatial_transcoder::linalg::Matrix;

/// Random instance with L = 5 directions (two mirror pairs and one median
/// point), P = 3 speakers with one symmetry pair, M = 2, N = 3, every
/// coefficient positive.
pub fn random_instance(seed: u64) -> (Problem<f64>, Matrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dirs = Vec::new();
    for _ in 0..2 {
        let d = Direction::new(rng.gen_range(5.0..175.0), rng.gen_range(-60.0..60.0)).unwrap();
        dirs.push(d);
        dirs.push(d.mirrored());
    }
    dirs.push(Direction::new(if rng.gen_bool(0.5) { 0.0 } else { 180.0 }, rng.gen_range(-60.0..60.0)).unwrap());
    let weights: Vec<f64> = (0..5).map(|_| rng.gen_range(0.5..2.0)).collect();
    let cloud = PointCloud::new(dirs, weights).unwrap();

    let speakers: Vec<Speaker<f64>> = (0..3)
        .map(|i| Speaker {
            label: format!("S{i}"),
            direction: Direction::new(rng.gen_range(-180.0..180.0), rng.gen_range(-80.0..80.0)).unwrap(),
        })
        .collect();
    let a = rng.gen_range(0..3);
    let b = (a + rng.gen_range(1..3)) % 3;
    let layout = SpeakerLayout::new(speakers).unwrap().with_symmetry_pairs(vec![(a, b)]).unwrap();

    let g = Matrix::from_fn(5, 2, |_, _| rng.gen_range(-1.0..1.0));
    let d = Matrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
    let enc = EncodingMatrix::new(g, cloud, vec!["I0".into(), "I1".into()]).unwrap();
    let dec = DecoderToSpeaker::new(d, layout, vec!["O0".into(), "O1".into(), "O2".into()]).unwrap();

    let mut coeffs = CostCoefficients { l_max_db: rng.gen_range(0.0..6.0), ..Default::default() };
    for t in Term::ALL {
        coeffs.set(t, rng.gen_range(0.1..1.0));
    }
    let problem = Problem::new(enc, dec, coeffs).unwrap();
    let t = Matrix::from_fn(3, 2, |_, _| rng.gen_range(-2.0..2.0));
    (problem, t)
}

/// Nearest distance of any step/abs argument to its kink.
fn kink_distance(problem: &Problem<f64>, t: &Matrix<f64>) -> f64 {
    let s = problem.speaker_entries(t).unwrap();
    let mut dist = s.as_slice().iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
    for (l, m) in problem.mirror.iter().enumerate() {
        if let Some(lm) = *m {
            for &(p, q) in &problem.pairs {
                dist = dist.min((s[(l, p)] - s[(lm, q)]).abs());
            }
        }
    }
    dist
}

pub struct GradientCheck {
    pub max_rel_error: f64,
    pub checked: usize,
    pub skipped: usize,
}

/// Compares the analytic gradient with central differences,
/// `h = 1e−6·max(1, |t|)`. Entries within 1e−4 of a kink are skipped.
/// The relative error is floored at magnitude 1e−6, so gradients that
/// vanish analytically are compared with an absolute tolerance of 1e−11.
pub fn check_gradient(problem: &Problem<f64>, t: &Matrix<f64>) -> GradientCheck {
    let (_, grad) = problem.cost_gradient(t).unwrap();
    let d_max = problem.coefficients.d_max();
    let near_kink = kink_distance(problem, t) < 1e-4;
    let mut out = GradientCheck { max_rel_error: 0.0, checked: 0, skipped: 0 };
    for i in 0..t.rows() {
        for j in 0..t.cols() {
            let x = t[(i, j)];
            if near_kink || (x - d_max).abs() < 1e-4 {
                out.skipped += 1;
                continue;
            }
            let h = 1e-6 * x.abs().max(1.0);
            let mut tp = t.clone();
            tp[(i, j)] = x + h;
            let mut tm = t.clone();
            tm[(i, j)] = x - h;
            let fd = (problem.total_cost(&tp).unwrap() - problem.total_cost(&tm).unwrap()) / (2.0 * h);
            let a = grad[(i, j)];
            let scale = a.abs().max(fd.abs()).max(1e-6);
            out.max_rel_error = out.max_rel_error.max((a - fd).abs() / scale);
            out.checked += 1;
        }
    }
    out
}
