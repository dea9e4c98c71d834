//! Builds the three split protocols over one log and prints how each one
//! carves a user's history into inputs and targets. Traditional sampling
//! ignores time, proportional holds out each user's most recent fraction,
//! and strict cutoff holds out everything after a global timestamp.

use temporec::corpus::{build_catalog_and_matrix, Interaction, InteractionLog};
use temporec::split::{
    assemble_phase_sets, group_by_user, verify_conservation, verify_leakage, verify_temporal_order,
    Phase, Protocol, SplitParams,
};

fn main() -> temporec::Result<()> {
    // Ten users, each interacting with a drifting window of items: early
    // users touch low item ids, late interactions reach higher ids.
    let mut records = Vec::new();
    for u in 0..10 {
        for step in 0..12 {
            let t = (u * 40 + step * 25) as i64;
            let item = (u + step) % 15;
            records.push(Interaction {
                user: format!("user{u:02}"),
                item: format!("item{item:02}"),
                timestamp: t,
                rating: None,
            });
        }
    }
    let log = InteractionLog::new(records, None);
    let (catalog, _, users) = build_catalog_and_matrix(&log)?;
    let universe = group_by_user(&log, &catalog, &users)?;

    let params = SplitParams {
        holdout_frac: 0.25,
        val_user_frac: 0.5,
        cutoff_quantile: 0.8,
        cutoff_time: None,
    };

    for protocol in [
        Protocol::Traditional,
        Protocol::Proportional,
        Protocol::StrictCutoff,
    ] {
        let sets = assemble_phase_sets(
            &log,
            &catalog,
            &users,
            protocol,
            Phase::Development,
            &params,
            42,
        )?;
        let val = &sets.validation;
        println!(
            "{:<13} validation users {:?}, test cutoff t = {}",
            protocol.name(),
            sets.val_users,
            sets.test_cutoff.expect("development phase")
        );
        for holdout in &val.users {
            let inputs: Vec<i64> = holdout.inputs.iter().map(|&(t, _)| t).collect();
            let targets: Vec<i64> = holdout.targets.iter().map(|&(t, _)| t).collect();
            println!(
                "  user {:>2}: input times {inputs:?} -> target times {targets:?}",
                holdout.user
            );
        }

        verify_leakage(val, &sets.train)?;
        verify_temporal_order(val)?;
        let test = sets.test.as_ref().expect("development phase");
        verify_leakage(test, &sets.train)?;
        verify_temporal_order(test)?;
        verify_conservation(test, &universe)?;
        println!("  safety checks passed; test users {}\n", test.users.len());
    }
    Ok(())
}
