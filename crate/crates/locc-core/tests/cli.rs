//! End-to-end checks of the `locc` binary: exit codes, file outputs, and
//! determinism of generated artifacts.

use std::path::Path;
use std::process::{Command, Output};

use locc_core::channels::Channel;
use locc_core::harness::{generate_tree, inject_redundancy, GenSpec, PartySchedule};
use locc_core::io;
use locc_core::numerics::{identity, re, CMatrix, Tolerances};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn locc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_locc"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn write_dephasing_channel(path: &Path) {
    let mut p0 = CMatrix::zeros(2, 2);
    p0[(0, 0)] = re(1.0);
    let mut p1 = CMatrix::zeros(2, 2);
    p1[(1, 1)] = re(1.0);
    let c = Channel::new(vec![2], vec![p0, p1]).unwrap();
    std::fs::write(path, io::channel_to_json(&c)).unwrap();
}

#[test]
fn info_reports_invariants_and_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let channel = dir.path().join("dephasing.json");
    write_dephasing_channel(&channel);

    let out = locc(
        &["info", "dephasing.json", "--np", "8", "--json", "bounds.json"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("kraus rank kappa: 2"));
    assert!(stdout.contains("chi             : 2"));
    assert!(stdout.contains("extreme point   : no"));
    assert!(stdout.contains("rounds >= 2"));

    let bounds = std::fs::read_to_string(dir.path().join("bounds.json")).unwrap();
    assert!(bounds.contains("locc-bounds/1"));
    assert!(bounds.contains("\"global_outcome_bound\": 4"));
}

#[test]
fn info_rejects_malformed_files_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("broken.json"), "{\"version\": \"locc-chan").unwrap();
    let out = locc(&["info", "broken.json"], dir.path());
    assert_eq!(code(&out), 2);
    let out = locc(&["info", "missing.json"], dir.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn gen_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "gen", "--dims", "2,2", "--rounds", "2", "--outcomes", "3", "--seed", "7",
    ];
    let out = locc(&[&args[..], &["--output", "a.json"]].concat(), dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = locc(&[&args[..], &["--output", "b.json"]].concat(), dir.path());
    assert_eq!(code(&out), 0);
    let a = std::fs::read(dir.path().join("a.json")).unwrap();
    let b = std::fs::read(dir.path().join("b.json")).unwrap();
    assert_eq!(a, b, "same seed, byte-identical trees");

    let out = locc(
        &[&args[..2], &["2,2", "--rounds", "2", "--outcomes", "3", "--seed", "8", "--output", "c.json"]].concat(),
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    let c = std::fs::read(dir.path().join("c.json")).unwrap();
    assert_ne!(a, c, "different seeds differ");
}

#[test]
fn gen_accepts_config_documents() {
    let dir = tempfile::tempdir().unwrap();
    let spec = GenSpec {
        dims: vec![2, 2],
        rounds: 1,
        outcomes: vec![4],
        party_schedule: PartySchedule::SeededRandom,
        seed: 21,
    };
    std::fs::write(dir.path().join("spec.json"), io::gen_spec_to_json(&spec)).unwrap();
    let out = locc(
        &["gen", "--config", "spec.json", "--output", "tree.json"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let via_flags = locc(
        &[
            "gen", "--dims", "2,2", "--rounds", "1", "--outcomes", "4", "--schedule",
            "seeded-random", "--seed", "21", "--output", "tree2.json",
        ],
        dir.path(),
    );
    assert_eq!(code(&via_flags), 0);
    assert_eq!(
        std::fs::read(dir.path().join("tree.json")).unwrap(),
        std::fs::read(dir.path().join("tree2.json")).unwrap(),
        "config file and flags produce the same artifact"
    );
}

#[test]
fn validate_passes_generated_and_flags_broken_trees() {
    let dir = tempfile::tempdir().unwrap();
    let tree = generate_tree(&GenSpec {
        dims: vec![2, 2],
        rounds: 2,
        outcomes: vec![3],
        party_schedule: PartySchedule::RoundRobin,
        seed: 3,
    })
    .unwrap();
    std::fs::write(dir.path().join("tree.json"), io::tree_to_json(&tree)).unwrap();
    let out = locc(
        &["validate", "tree.json", "--json", "report.json"],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("overall: pass"));
    assert!(std::fs::read_to_string(dir.path().join("report.json"))
        .unwrap()
        .contains("locc-validation/1"));

    // halve the root label: semantic failure, exit 1, the root condition flagged
    let (rep, mut root) = tree.clone().into_parts();
    root.c_matrix *= re(0.5);
    let broken = locc_core::trees::LoccTree::new(rep, root).unwrap();
    std::fs::write(dir.path().join("broken.json"), io::tree_to_json(&broken)).unwrap();
    let out = locc(&["validate", "broken.json"], dir.path());
    assert_eq!(code(&out), 1);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("2  root is identity"));
    assert!(stdout.contains("FAIL"));

    // truncated file: exit 2
    std::fs::write(dir.path().join("trunc.json"), &io::tree_to_json(&tree)[..40]).unwrap();
    let out = locc(&["validate", "trunc.json"], dir.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn prune_writes_outputs_and_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let tree = generate_tree(&GenSpec {
        dims: vec![2, 2],
        rounds: 2,
        outcomes: vec![3],
        party_schedule: PartySchedule::RoundRobin,
        seed: 11,
    })
    .unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(5);
    let injected = inject_redundancy(&tree, 3, &mut rng).unwrap();
    std::fs::write(dir.path().join("in.json"), io::tree_to_json(&injected)).unwrap();

    let out = locc(
        &[
            "prune", "in.json", "--output", "out.json", "--report", "report.json",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    assert!(report.contains("locc-prune-report/1"));
    assert!(report.contains("\"channel_residual\""));

    // pruning the pruned tree changes nothing, byte for byte
    let out = locc(&["prune", "out.json", "--output", "out2.json"], dir.path());
    assert_eq!(code(&out), 0);
    assert_eq!(
        std::fs::read(dir.path().join("out.json")).unwrap(),
        std::fs::read(dir.path().join("out2.json")).unwrap()
    );

    // the pruned tree implements the same channel
    let out = locc(&["compare", "in.json", "out.json"], dir.path());
    assert_eq!(code(&out), 0);
}

#[test]
fn deterministic_mode_enforces_local_dimension_bound() {
    let dir = tempfile::tempdir().unwrap();
    // one qubit party measuring with 5 outcomes: at most 4 survive
    let tree = generate_tree(&GenSpec {
        dims: vec![2, 2],
        rounds: 1,
        outcomes: vec![5],
        party_schedule: PartySchedule::RoundRobin,
        seed: 13,
    })
    .unwrap();
    assert_eq!(tree.root().children.len(), 5);
    std::fs::write(dir.path().join("in.json"), io::tree_to_json(&tree)).unwrap();
    let out = locc(
        &[
            "prune", "in.json", "--mode", "deterministic", "--output", "det.json",
            "--report", "report.json",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let pruned = io::tree_from_json(
        &std::fs::read_to_string(dir.path().join("det.json")).unwrap(),
        &Tolerances::default(),
    )
    .unwrap();
    assert!(pruned.root().children.len() <= 4);
    let report = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    assert!(report.contains("\"mode\": \"deterministic\""));
    assert!(report.contains("\"channel_residual\": null"));
}

#[test]
fn compare_distinguishes_channels() {
    let dir = tempfile::tempdir().unwrap();
    write_dephasing_channel(&dir.path().join("dephasing.json"));
    let id = Channel::new(vec![2], vec![identity(2)]).unwrap();
    std::fs::write(dir.path().join("id.json"), io::channel_to_json(&id)).unwrap();
    let out = locc(&["compare", "id.json", "dephasing.json"], dir.path());
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("different channels"));
    let out = locc(&["compare", "id.json", "id.json"], dir.path());
    assert_eq!(code(&out), 0);
}

#[test]
fn tolerance_flags_are_honored() {
    let dir = tempfile::tempdir().unwrap();
    let tree = generate_tree(&GenSpec {
        dims: vec![2],
        rounds: 1,
        outcomes: vec![3],
        party_schedule: PartySchedule::RoundRobin,
        seed: 17,
    })
    .unwrap();
    // nudge the root label: fails at the default tolerance, passes at 1e-2
    let (rep, mut root) = tree.into_parts();
    let kappa = rep.kappa();
    root.c_matrix = identity(kappa).scale(1.0 + 1e-4);
    for child in &mut root.children {
        child.c_matrix *= re(1.0 + 1e-4);
    }
    let nudged = locc_core::trees::LoccTree::new(rep, root).unwrap();
    std::fs::write(dir.path().join("t.json"), io::tree_to_json(&nudged)).unwrap();
    let strict = locc(&["validate", "t.json"], dir.path());
    assert_eq!(code(&strict), 1);
    let loose = locc(&["validate", "t.json", "--tol-eq", "1e-2"], dir.path());
    assert_eq!(code(&loose), 0, "{}", String::from_utf8_lossy(&loose.stdout));
}
