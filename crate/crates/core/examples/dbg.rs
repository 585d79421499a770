use thermoscope::*;
use num_complex::Complex64;

fn main() {
    let f = RationalMap::quadratic(Complex64::new(0.0, 0.0));
    let julia = measures::julia_sample(&f, 18, 1024, 3).unwrap();
    println!("julia len {} mesh {:.6e}", julia.len(), julia.mesh());
    let w0 = Weight::constant(0.0);
    let s = periodic::periodic_points(&f, &w0, 5, 192, 1 << 10).unwrap();
    let rep: Vec<_> = s.points.iter().filter(|p| p.repelling).collect();
    println!("repelling found: {}", rep.len());
    for pp in rep.iter().take(5) {
        println!("  pt {:?} dist_to_julia {:.6e}", pp.point.to_affine(), julia.nearest(&pp.point).1);
    }
    // pressure curve admissibility
    let cells = std::sync::Arc::new(measures::julia_sample(&f, 12, 128, 1).unwrap());
    println!("cells len {}", cells.len());
    let phi = Weight::constant(0.0);
    let psi = Weight::angular(1.0, 1);
    for t in [-0.6, -0.1, 0.0, 0.1, 0.6] {
        let wt = Weight::combination(vec![(1.0, &phi), (t, &psi)]);
        println!("t={t}: osc over cells = {:.6}, admissible = {}", wt.oscillation(&cells), wt.admissible(2, &cells));
    }
}
