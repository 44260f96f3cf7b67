// Online EM with both step-size schedules, reporting every epoch.

use online_dawid_skene::prelude::*;

pub fn run_example() -> Result<Vec<OnlineFit>, Box<dyn std::error::Error>> {
    let instance = gen_instance(&SynthConfig {
        items: 600,
        seed: 5,
        ..SynthConfig::default()
    })?;
    let labels = &instance.labels;
    let init = Initialization::new(labels, InitMode::MajorityVote, 30)?;

    let mut fits = Vec::new();
    for schedule in [StepSchedule::online1(2.0, 1.5)?, StepSchedule::online2(0.9, 0.2)?] {
        let config = OnlineConfig {
            epochs: 8,
            seed: 3,
            ..OnlineConfig::new(schedule)
        };
        let fit = online_fit(labels, Some(&instance.truth), &init, &config)?;
        println!("{} a={} b={}", schedule.kind(), schedule.a(), schedule.b());
        for record in &fit.epochs {
            println!(
                "  epoch {:>2}  error {:>6}%  loglik {:.3}  resets {}",
                record.epoch,
                format_error_rate(record.error_rate.unwrap_or(f64::NAN)),
                record.log_likelihood,
                record.projections
            );
        }
        fits.push(fit);
    }
    Ok(fits)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example().map(|_| ())
}
