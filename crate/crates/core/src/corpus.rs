//! Bundled litmus programs.

pub struct Entry {
    pub name: &'static str,
    pub source: &'static str,
}

pub const ALL: &[Entry] = &[
    Entry { name: "bounded_loop", source: include_str!("../corpus/bounded_loop.lit") },
    Entry { name: "corr", source: include_str!("../corpus/corr.lit") },
    Entry { name: "init_values", source: include_str!("../corpus/init_values.lit") },
    Entry { name: "lb", source: include_str!("../corpus/lb.lit") },
    Entry { name: "lb_membar_ls", source: include_str!("../corpus/lb_membar_ls.lit") },
    Entry { name: "lock_fenced", source: include_str!("../corpus/lock_fenced.lit") },
    Entry { name: "lock_mp", source: include_str!("../corpus/lock_mp.lit") },
    Entry { name: "mp", source: include_str!("../corpus/mp.lit") },
    Entry { name: "mp_data", source: include_str!("../corpus/mp_data.lit") },
    Entry { name: "mp_fence", source: include_str!("../corpus/mp_fence.lit") },
    Entry { name: "mp_membar_ss", source: include_str!("../corpus/mp_membar_ss.lit") },
    Entry { name: "mp_membar_ss_ll", source: include_str!("../corpus/mp_membar_ss_ll.lit") },
    Entry { name: "mp_reader_ll_only", source: include_str!("../corpus/mp_reader_ll_only.lit") },
    Entry { name: "nested_create", source: include_str!("../corpus/nested_create.lit") },
    Entry { name: "own_read", source: include_str!("../corpus/own_read.lit") },
    Entry { name: "sb", source: include_str!("../corpus/sb.lit") },
    Entry { name: "sb_branch", source: include_str!("../corpus/sb_branch.lit") },
    Entry { name: "sb_fence", source: include_str!("../corpus/sb_fence.lit") },
    Entry { name: "sb_forward", source: include_str!("../corpus/sb_forward.lit") },
    Entry { name: "sb_membar_sl", source: include_str!("../corpus/sb_membar_sl.lit") },
    Entry { name: "sb_one_fence", source: include_str!("../corpus/sb_one_fence.lit") },
    Entry { name: "two_plus_two_w", source: include_str!("../corpus/two_plus_two_w.lit") },
    Entry { name: "wrc", source: include_str!("../corpus/wrc.lit") },
];

pub fn get(name: &str) -> Option<&'static str> {
    ALL.iter().find(|e| e.name == name).map(|e| e.source)
}
