// Step sizes of the two schedules and their partial sums.

use online_dawid_skene::prelude::*;

pub struct Partial {
    pub label: String,
    pub sum: f64,
    pub squared_sum: f64,
    pub bound: f64,
}

pub fn run_example() -> Result<Vec<Partial>, Box<dyn std::error::Error>> {
    let schedules = [
        StepSchedule::online1(2.0, 1.5)?,
        StepSchedule::online2(0.9, 0.2)?,
        StepSchedule::online2(0.75, 0.2)?,
        StepSchedule::online2(0.99, 0.4)?,
    ];
    let horizon = 100_000u64;
    let mut out = Vec::new();
    for s in schedules {
        let (mut sum, mut squared) = (0.0, 0.0);
        for j in 1..=horizon {
            let eta = s.eta(j);
            sum += eta;
            squared += eta * eta;
        }
        let label = format!("{} a={} b={}", s.kind(), s.a(), s.b());
        println!(
            "{label:<24} eta_1={:.4} eta_1e5={:.2e} sum={sum:.3} sum_sq={squared:.5} (bound {:.5})",
            s.eta(1),
            s.eta(horizon),
            s.squared_sum_bound()
        );
        out.push(Partial {
            label,
            sum,
            squared_sum: squared,
            bound: s.squared_sum_bound(),
        });
    }
    Ok(out)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example().map(|_| ())
}
