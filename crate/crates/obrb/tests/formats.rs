use std::fs;

use obrb::checkpoint::{self, CheckpointError, MAGIC};
use obrb::config::parse_config;
use obrb::output::{Table, COLUMNS, VIOLATION_COLUMNS};
use obrb::run::simulate;
use obrb_core::init::{random_divfree, Theta0Spec, PRNG_NAME};
use obrb_core::{build_grid, SimState};

const BASE: &str = include_str!("../configs/default.conf");

fn small(text: &str, n: usize, t_end: f64) -> obrb::RunConfig {
    let mut c = parse_config(text).unwrap();
    c.grid = build_grid(n, n, 1.0, 1.0).unwrap();
    c.t_end = t_end;
    c
}

fn state(nx: usize, ny: usize) -> SimState {
    let g = build_grid(nx, ny, 2.0, 1.0).unwrap();
    let theta = Theta0Spec::Random(1.0).build(&g, 4, None).unwrap();
    let mut s = SimState::new(random_divfree(&g, 0.3, 9), theta).unwrap();
    s.t = 1.0 / 3.0;
    s.step = 77;
    s
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let s = state(11, 7);
    let p = dir.path().join("s.chk");
    checkpoint::write(&s, &p).unwrap();
    let back = checkpoint::read(&p).unwrap();
    assert_eq!(back, s);
    assert_eq!(back.t.to_bits(), s.t.to_bits());
    assert_eq!(checkpoint::encode(&back), fs::read(&p).unwrap());
}

#[test]
fn checkpoint_rejects_foreign_and_short_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = checkpoint::encode(&state(5, 4));
    let p = dir.path().join("cut.chk");
    fs::write(&p, &bytes[..bytes.len() - 8]).unwrap();
    assert!(matches!(checkpoint::read(&p), Err(CheckpointError::Truncated { .. })));
    bytes[..8].copy_from_slice(b"NOTSNAP!");
    assert_ne!(&bytes[..8], MAGIC);
    fs::write(&p, &bytes).unwrap();
    assert!(matches!(checkpoint::read(&p), Err(CheckpointError::BadMagic { .. })));
}

#[test]
fn grid_mismatch_names_both_grids() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.chk");
    checkpoint::write(&state(6, 4), &p).unwrap();
    let other = build_grid(8, 8, 1.0, 1.0).unwrap();
    let msg = checkpoint::read_on(&p, &other).unwrap_err().to_string();
    assert!(msg.contains(&checkpoint::describe(&build_grid(6, 4, 2.0, 1.0).unwrap())), "{msg}");
    assert!(msg.contains(&checkpoint::describe(&other)), "{msg}");
}

#[test]
fn diagnostics_csv_has_the_documented_schema() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(BASE, 12, 0.1);
    c.output_every = 3;
    c.out_dir = dir.path().to_path_buf();
    let traj = simulate(&c, Some(&c.out_dir)).unwrap();
    let text = fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
    assert!(text.contains(PRNG_NAME));
    assert!(text.contains("# seed = 1"));
    let table = Table::parse(&text).unwrap();
    assert_eq!(table.columns, COLUMNS);
    let t = table.column("t").unwrap();
    assert!(t.windows(2).all(|w| w[1] > w[0]));
    assert!((t.last().unwrap() - traj.state.t).abs() < 1e-15);
    assert_eq!(t.len() as u64, traj.state.step / 3 + 1 + u64::from(traj.state.step % 3 != 0));

    let v = fs::read_to_string(dir.path().join("violations.csv")).unwrap();
    let head = v.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(head, VIOLATION_COLUMNS.join(","));
    assert!(dir.path().join("final.chk").exists());
}

#[test]
fn zero_data_give_zero_diagnostics() {
    let text = BASE
        .replace("linear_y(-1)", "linear_y(0)")
        .replace("linear_y(1, -1)", "constant(0)")
        .replace("aligned_plus_mode(0.1, 2, 1)", "zero");
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(&text, 8, 0.05);
    c.output_every = 1;
    c.out_dir = dir.path().to_path_buf();
    simulate(&c, Some(&c.out_dir)).unwrap();
    let table = Table::parse(&fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap()).unwrap();
    for name in COLUMNS.iter().skip(1) {
        let col = table.column(name).unwrap();
        assert!(col.iter().all(|v| *v == 0.0), "{name}: {col:?}");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let mut c = small(BASE, 12, 0.1);
    c.theta0 = Theta0Spec::AlignedPlusRandom(0.3);
    c.u0 = "random_divfree(0.2)".parse().unwrap();
    c.checkpoint_every = 4;
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        c.out_dir = d.path().to_path_buf();
        simulate(&c, Some(&c.out_dir)).unwrap();
    }
    let mut names: Vec<_> = fs::read_dir(dirs[0].path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() > 3);
    for n in names {
        assert_eq!(
            fs::read(dirs[0].path().join(&n)).unwrap(),
            fs::read(dirs[1].path().join(&n)).unwrap(),
            "{n:?}"
        );
    }
}

#[test]
fn run_resumes_velocity_from_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(BASE, 10, 0.05);
    let g = c.grid;
    let u = random_divfree(&g, 0.1, 3);
    let s = SimState::new(u.clone(), Theta0Spec::Zero.build(&g, 0, None).unwrap()).unwrap();
    let p = dir.path().join("u.chk");
    checkpoint::write(&s, &p).unwrap();
    c.u0 = format!("file({})", p.display()).parse().unwrap();
    c.out_dir = dir.path().join("out");
    let traj = simulate(&c, Some(&c.out_dir)).unwrap();
    assert_eq!(traj.setup.initial.u, u);

    c.grid = build_grid(12, 12, 1.0, 1.0).unwrap();
    assert!(simulate(&c, None).is_err());
}
