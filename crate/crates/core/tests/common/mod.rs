#![allow(dead_code)]

use horizon_core::system::SystemDef;

pub fn painleve1() -> SystemDef {
    SystemDef::parse("painleve1", &["u", "v"], vec![2, 3], 1.0, &["v", "6*u^2"], &["0", "t"], &[]).unwrap()
}

pub fn selfsimilar() -> SystemDef {
    SystemDef::parse(
        "selfsimilar",
        &["u", "v"],
        vec![1, 1],
        2.0,
        &["u^(1-m)*v", "-beta*t*u^(1-m)*v"],
        &["0", "-alpha*u"],
        &[("m", -1.0), ("beta", -1.0), ("alpha", 1.0)],
    )
    .unwrap()
}

pub fn wwl_k2() -> SystemDef {
    SystemDef::parse(
        "wwl_k2",
        &["u1", "v1", "u2", "v2"],
        vec![1, 3, 1, 3],
        2.0,
        &["v1", "-u1^5 - 3*u1^2*u2^3*sin(t)", "v2", "-u2^5 - 3*u1^3*u2^2*sin(t)"],
        &["0", "0", "0", "0"],
        &[],
    )
    .unwrap()
}

pub fn wwl_k1() -> SystemDef {
    SystemDef::parse(
        "wwl_k1",
        &["u1", "v1", "u2", "v2"],
        vec![1, 2, 1, 2],
        1.0,
        &["v1", "-u1^3 - 2*u1*u2^2*sin(t)", "v2", "-u2^3 - 2*u1^2*u2*sin(t)"],
        &["0", "0", "0", "0"],
        &[],
    )
    .unwrap()
}

pub fn all() -> Vec<SystemDef> {
    vec![painleve1(), selfsimilar(), wwl_k2(), wwl_k1()]
}

/// Time windows in which each system has nondegenerate balance roots.
pub fn t_window(name: &str) -> (f64, f64) {
    match name {
        "painleve1" => (-2.0, 2.0),
        "selfsimilar" => (0.25, 3.0),
        "wwl_k2" => (3.6, 5.8),
        _ => (3.8, 5.6),
    }
}
