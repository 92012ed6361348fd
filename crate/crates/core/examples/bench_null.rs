use std::time::Instant;

use ltest_core::combine::default_grid;
use ltest_core::corr::scaled_squared_correlations;
use ltest_core::data::RngSpec;
use ltest_core::permutation::{build_null, StatisticRequest};
use ltest_core::simlab::{gen_data, InnovationDist};

fn main() {
    let m = gen_data::<f64>(100, 100, InnovationDist::Gaussian, None, &mut RngSpec::new(1, 0).stream()).unwrap();
    let t = Instant::now();
    for _ in 0..200 {
        std::hint::black_box(scaled_squared_correlations(&m));
    }
    println!("corr only: {:.3} ms", t.elapsed().as_secs_f64() * 5.0);
    for reqs in [vec![StatisticRequest::TopK(1)], default_grid(100).unwrap().requests(), vec![StatisticRequest::CovL4]] {
        let t = Instant::now();
        build_null(&m, &reqs, 200, RngSpec::new(2, 0)).unwrap();
        println!("{:?}: {:.3} ms per replicate", reqs, t.elapsed().as_secs_f64() * 5.0);
    }
}
