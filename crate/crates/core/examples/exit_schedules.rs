//! The published exit-schedule catalog, rescaling to toy networks and the
//! cost model.
//!
//! cargo run --example exit_schedules

use ase::net::Architecture;
use ase::schedule::{make_dn_schedule, predicted_acceleration, ExitSchedule, ScheduleSpec, CATALOG};

fn main() -> ase::Result<()> {
    println!("{:10} {:>10} {:>10}  row", "schedule", "predicted", "reported");
    for e in CATALOG.iter() {
        let s = make_dn_schedule(e.name)?;
        let p = predicted_acceleration(&s, e.arch)?;
        println!("{:10} {:>9.2}% {:>9.2}%  {:?}", e.name, 100.0 * p, 100.0 * e.reported_acceleration, s.blocks);
    }

    let toy = Architecture::Stack { blocks: 6 };
    println!("\non {toy:?}:");
    for spec in ["D3-DiT", "noise-easy:2", "data-easy:2", "all-keep"] {
        let s = ScheduleSpec::parse(spec)?.resolve(toy, 10)?;
        println!("  {:14} {:?}  predicted {:.2}%", s.name, s.blocks, 100.0 * predicted_acceleration(&s, toy)?);
    }

    let s = ExitSchedule::new("ramp", toy, vec![6, 6, 5, 5, 4, 4, 3, 3, 2, 2])?;
    for t in [1, 250, 500, 750, 1000] {
        println!("  t = {t:4}: {} blocks", s.lookup_blocks(t, 1000));
    }
    Ok(())
}
