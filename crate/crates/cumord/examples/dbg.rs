use cumord::quad::Quadratic;
use cumord::family::build_pmf;

fn main() {
    let q = Quadratic::new(1.0, 0.0, 1.0);
    let pmf = build_pmf(1.0, &q, 1e-12).unwrap();
    println!("window: {:?}", pmf.window);
    println!("C = {}", pmf.norm_constant);
    println!("tails: {} {}", pmf.tail_mass_lo, pmf.tail_mass_hi);
    let sum: f64 = pmf.probs().iter().sum();
    println!("sum = {}", sum);
    for j in 0..6 {
        println!("p({j}) = {}", pmf.prob(j));
    }
    // expected
    let c = std::f64::consts::PI / std::f64::consts::PI.sinh();
    let mut numer = 1.0f64;
    for j in 0..6i64 {
        let f: f64 = (1..=j).map(|t| t as f64).product::<f64>();
        let f1: f64 = (1..=j+1).map(|t| t as f64).product::<f64>();
        println!("expected p({j}) = {}", c*numer/(f*f1));
        numer *= (j*j+1) as f64;
    }
}
