//! Runs a preset scenario and prints its summary.
//!
//! `cargo run --release -p aac-core --example scenario -- wmr`

use std::time::Instant;

use aac_core::presets;
use aac_core::summarize;

fn main() {
    let name = std::env::args().nth(1).unwrap_or_else(|| "wmr".into());
    let Some(scenario) = presets::by_name(&name) else {
        eprintln!("unknown scenario {name:?} (scalar | wmr | ibvs)");
        std::process::exit(2);
    };
    let start = Instant::now();
    let out = match scenario.run() {
        Ok(out) => out,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(3);
        }
    };
    let s = summarize(&out.log, scenario.plant.theta_true().as_ref()).expect("non-empty log");
    println!("{name}: {:.2?}", start.elapsed());
    println!("  error    {:.3e} -> {:.3e}", s.initial_error_norm, s.final_error_norm);
    println!(
        "  theta    {:?} (err {:?})",
        s.final_theta.as_slice(),
        s.final_theta_error
    );
    println!("  wc       {:?}", s.final_wc.as_slice());
    println!("  wa       {:?}", s.final_wa.as_slice());
    println!("  gap      {:.3e} (|wc| {:.3e})", s.actor_critic_gap, s.final_wc.norm());
    println!("  max |u|  {:.3e}, t5% {:?}", s.max_control_norm, s.time_to_5pct);
    println!(
        "  sigma1   {:.3e} -> {:.3e}, min eig Γ {:.3e}",
        s.sigma1_first, s.sigma1_last, s.min_gamma_eig
    );
    for row in out.log.rows.iter().step_by((out.log.rows.len() / 12).max(1)) {
        println!(
            "  t={:6.2} |xbar|={:.3e} theta={:?} delta={:.3e} |wc|={:.3} |wa-wc|={:.3e}",
            row.t,
            row.xbar.norm(),
            row.theta.as_slice(),
            row.delta,
            row.wc.norm(),
            (&row.wa - &row.wc).norm()
        );
    }
}
