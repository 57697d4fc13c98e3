use trajmat::agent::transfer::*;
use trajmat::env::register_suite_adapters;
use trajmat::lift::{AdapterRegistry, Lift, LiftConfig};

fn suite_lift() -> Lift {
    let mut reg = AdapterRegistry::new();
    register_suite_adapters(&mut reg);
    Lift::new(LiftConfig::compact_default(), reg)
}

#[test]
fn tune_final() {
    let lift = suite_lift();
    let opts = SourceOptions::default();
    let motif = collect_motif_sources(&lift, &opts).unwrap();
    for epochs in [240, 400] {
        let t0 = std::time::Instant::now();
        let (_, m) = pretrain_value_branch(&motif, lift.config(), &PretrainOptions { epochs, ..Default::default() }).unwrap();
        println!("motif e{epochs}: val_mse={:.5} rank={:?} ({:?})", m.val_mse, m.rank_corr, t0.elapsed());
    }
    let mixed = collect_mixed_sources(&lift, &opts).unwrap();
    let t0 = std::time::Instant::now();
    let (_, mm) = pretrain_value_branch(&mixed, lift.config(), &PretrainOptions { epochs: 240, ..Default::default() }).unwrap();
    println!("mixed e240 ({}): val_mse={:.5} rank={:?} ({:?})", mixed.len(), mm.val_mse, mm.rank_corr, t0.elapsed());
}
