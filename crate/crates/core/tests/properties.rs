mod common;

macro_rules! property {
    ($($name:ident),* $(,)?) => {
        $(
            #[test]
            fn $name() {
                if let Err(e) = common::$name() {
                    panic!("{e}");
                }
            }
        )*
    };
}

property!(
    lattice_laws,
    transfer_monotone,
    model_inclusion_chain,
    datalog_fact_monotone,
    dominators_brute_force,
    oracle_behavior_inclusion,
    verdict_monotone,
    deterministic,
    sound_on_random_programs,
    single_thread_degeneracy,
);
