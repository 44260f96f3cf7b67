// Small grid over the online1 parameter `a`, averaged over seeds.

use online_dawid_skene::prelude::*;

pub fn run_example() -> Result<Vec<(f64, f64)>, Box<dyn std::error::Error>> {
    let instance = gen_instance(&SynthConfig {
        items: 400,
        seed: 21,
        ..SynthConfig::default()
    })?;
    let labels = &instance.labels;
    let init = Initialization::new(labels, InitMode::MajorityVote, 30)?;
    let seeds = [0u64, 1, 2];

    let mut rows = Vec::new();
    for a in [1.0, 2.0, 4.0] {
        let schedule = StepSchedule::online1(a, 1.5)?;
        let mut total = 0.0;
        for &seed in &seeds {
            let config = OnlineConfig {
                epochs: 5,
                seed,
                ..OnlineConfig::new(schedule)
            };
            let fit = online_fit(labels, Some(&instance.truth), &init, &config)?;
            total += fit.epochs.last().and_then(|r| r.error_rate).unwrap_or(f64::NAN);
        }
        let mean = total / seeds.len() as f64;
        println!("a={a:<4} b=1.5  mean error {}%", format_error_rate(mean));
        rows.push((a, mean));
    }
    Ok(rows)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example().map(|_| ())
}
