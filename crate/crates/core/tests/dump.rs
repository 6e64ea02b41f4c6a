use std::path::Path;

use contactlab::contact::{evolve, Configuration};
use contactlab::environment::{sample_environment, Environment, EnvironmentSpec};
use contactlab::harris::HarrisSystem;
use contactlab::lattice::{Site, Window};

const GOLDEN: &str = "tests/data/golden_d1_r3.dump";

fn env() -> Environment {
    sample_environment(&EnvironmentSpec::dirac(2.0, 1), &Window::new(3, 2.0).unwrap(), 0).unwrap()
}

fn golden_bytes() -> Vec<u8> {
    std::fs::read(Path::new(env!("CARGO_MANIFEST_DIR")).join(GOLDEN)).unwrap()
}

#[test]
fn golden_dump_reads_and_rewrites_identically() {
    let bytes = golden_bytes();
    let sys = HarrisSystem::read_dump(&env(), bytes.as_slice()).unwrap();
    assert_eq!(sys.window().radius, 3);
    assert_eq!(sys.t_max(), 2.0);
    let mut out = Vec::new();
    sys.write_dump(&mut out).unwrap();
    assert_eq!(out, bytes);
}

#[test]
fn seeded_system_still_produces_the_golden_clocks() {
    let seeded = HarrisSystem::new(&env(), Window::new(3, 2.0).unwrap(), 7);
    let mut out = Vec::new();
    seeded.write_dump(&mut out).unwrap();
    assert_eq!(out, golden_bytes(), "clock streams changed for a fixed seed");
}

#[test]
fn replay_from_dump_matches_the_seeded_run() {
    let seeded = HarrisSystem::new(&env(), Window::new(3, 2.0).unwrap(), 7);
    let loaded = HarrisSystem::read_dump(&env(), golden_bytes().as_slice()).unwrap();
    let a = evolve(&seeded, &Configuration::singleton(Site::ORIGIN), 2.0).unwrap();
    let b = evolve(&loaded, &Configuration::singleton(Site::ORIGIN), 2.0).unwrap();
    assert_eq!(a.events.len(), b.events.len());
    assert!(a.events.iter().zip(&b.events).all(|(x, y)| x.same_event(y)));
}

#[test]
fn corrupt_dumps_are_rejected() {
    let mut bytes = golden_bytes();
    bytes[0] = b'X';
    assert!(HarrisSystem::read_dump(&env(), bytes.as_slice()).is_err());
    let bytes = golden_bytes();
    assert!(HarrisSystem::read_dump(&env(), &bytes[..bytes.len() - 3]).is_err());
    let env2 = sample_environment(&EnvironmentSpec::dirac(2.0, 2), &Window::new(3, 2.0).unwrap(), 0).unwrap();
    assert!(HarrisSystem::read_dump(&env2, golden_bytes().as_slice()).is_err());
}
