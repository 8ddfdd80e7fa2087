//! Prints the linear and cosine schedules side by side and the timesteps a
//! strided sampler visits.
//!
//! cargo run --example noise_schedule [T] [sampling_steps]

use ttx::diffusion::{build_schedule, ScheduleKind};
use ttx::NoiseSchedule;

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(200);
    let sampling: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(10);
    let linear = NoiseSchedule::linear_scaled(steps)?;
    let cosine = build_schedule(ScheduleKind::Cosine, steps, 0.0, 0.0)?;

    println!("{:>5} {:>10} {:>10} {:>10} {:>10}", "t", "beta_lin", "abar_lin", "beta_cos", "abar_cos");
    for t in [1, steps / 4, steps / 2, 3 * steps / 4, steps] {
        let t = t.max(1);
        println!(
            "{t:>5} {:>10.5} {:>10.5} {:>10.5} {:>10.5}",
            linear.beta(t),
            linear.alpha_bar(t),
            cosine.beta(t),
            cosine.alpha_bar(t)
        );
    }
    println!("strided steps ({sampling}): {:?}", linear.strided_steps(sampling)?);
    Ok(())
}
