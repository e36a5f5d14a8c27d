use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use aoi_core::artifact::Artifact;
use aoi_core::{ChannelModel, DeviceSpec, SystemConfigF64};

fn aoi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aoi"))
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn mixed_config(dir: &Path) -> PathBuf {
    let ch = ChannelModel::uniform(vec![1.0, 1.5, 2.0]).unwrap();
    let cfg = SystemConfigF64::new(
        vec![
            DeviceSpec::type_i(0.6, vec![2.4, 1.6, 1.2], ch.clone(), 4, 1.0),
            DeviceSpec::type_ii(1.2, vec![2.2, 1.5, 1.1], ch.clone(), 1.0),
            DeviceSpec::type_ii(1.5, vec![2.8, 1.9, 1.4], ch, 1.0),
        ],
        2,
        5,
    )
    .unwrap();
    let path = dir.join("mixed.json");
    fs::write(&path, cfg.to_json_string().unwrap()).unwrap();
    path
}

fn type_ii_config(dir: &Path) -> PathBuf {
    let ch = ChannelModel::uniform(vec![1.0, 1.5, 2.0, 2.5]).unwrap();
    let devs = [2.0, 2.5, 3.0]
        .iter()
        .zip([1.0, 1.4, 1.8])
        .map(|(&cu, cs)| {
            let tx = [1.0, 1.5, 2.0, 2.5].iter().map(|h| cu / h).collect();
            DeviceSpec::type_ii(cs, tx, ch.clone(), 1.0)
        })
        .collect();
    let cfg = SystemConfigF64::new(devs, 2, 6).unwrap();
    let path = dir.join("type_ii.json");
    fs::write(&path, cfg.to_json_string().unwrap()).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_verify_simulate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = mixed_config(dir.path());
    let art = dir.path().join("a.json");
    let out = aoi(&["solve", "--config", s(&cfg), "--out", s(&art)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.starts_with("kind,states,iterations,final_span,theta\nfull,540,"));

    let slice = dir.path().join("slice.csv");
    let out = aoi(&[
        "verify-structure",
        "--artifact",
        s(&art),
        "--slice",
        "h1",
        "--slice-out",
        s(&slice),
    ]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("upward_closure,0"));
    let slice = fs::read_to_string(slice).unwrap();
    assert!(slice.starts_with("h1,delta,action_class,action\n"));
    assert_eq!(slice.lines().count(), 1 + 3 * 5);

    for policy in ["optimal", "myopic", "never"] {
        let args = [
            "simulate",
            "--artifact",
            s(&art),
            "--policy",
            policy,
            "--slots",
            "4000",
            "--seed",
            "7",
        ];
        let a = aoi(&args);
        assert_eq!(code(&a), 0);
        let csv = stdout(&a);
        assert!(csv.starts_with("policy,seed,slots,beta,"));
        assert!(csv
            .lines()
            .nth(1)
            .unwrap()
            .starts_with(&format!("{policy},7,4000,1,")));
        assert_eq!(csv, stdout(&aoi(&args)));
    }
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = mixed_config(dir.path());
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    assert_eq!(
        code(&aoi(&[
            "--threads",
            "1",
            "solve",
            "--config",
            s(&cfg),
            "--out",
            s(&a)
        ])),
        0
    );
    assert_eq!(
        code(&aoi(&[
            "--threads",
            "4",
            "solve",
            "--config",
            s(&cfg),
            "--out",
            s(&b)
        ])),
        0
    );
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let spec = dir.path().join("spec.json");
    fs::write(
        &spec,
        r#"{"n_type_i": 1, "n_type_ii": 2, "aoi_cap": 3, "dest_aoi_cap": 4,
            "channel_states": 2, "beta_grid": [0.5, 2.0], "slots": 2000, "seeds": [1, 2]}"#,
    )
    .unwrap();
    let (d1, d4) = (dir.path().join("s1"), dir.path().join("s4"));
    let o1 = aoi(&[
        "--threads",
        "1",
        "sweep",
        "--spec",
        s(&spec),
        "--out",
        s(&d1),
    ]);
    let o4 = aoi(&[
        "--threads",
        "4",
        "sweep",
        "--spec",
        s(&spec),
        "--out",
        s(&d4),
    ]);
    assert_eq!(code(&o1), 0);
    assert_eq!(o1.stdout, o4.stdout);
    assert!(stdout(&o1).starts_with("seed,beta,weighted_cost_pct,"));
    for name in [
        "sweep.csv",
        "improvements.csv",
        "failures.csv",
        "instance_1.json",
        "instance_2.json",
    ] {
        assert_eq!(
            fs::read(d1.join(name)).unwrap(),
            fs::read(d4.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn reduce_and_verify_reduced_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = type_ii_config(dir.path());
    let art = dir.path().join("r.json");
    let out = aoi(&["reduce", "--config", s(&cfg), "--out", s(&art)]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("\nreduced,"));
    let grid = dir.path().join("grid.csv");
    let out = aoi(&[
        "verify-structure",
        "--artifact",
        s(&art),
        "--grid-out",
        s(&grid),
    ]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).starts_with("ch_index,c_h,psi\n"));
    assert!(fs::read_to_string(grid)
        .unwrap()
        .starts_with("delta,ch_index,c_h,decision\n"));
    let sim = aoi(&["simulate", "--artifact", s(&art), "--slots", "1000"]);
    assert_eq!(code(&sim), 0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = mixed_config(dir.path());
    let art = dir.path().join("a.json");

    // validation: the error names the offending field
    let bad = dir.path().join("bad.json");
    let text = fs::read_to_string(&cfg)
        .unwrap()
        .replacen("\"weight\": 1.0", "\"weight\": -1.0", 1);
    fs::write(&bad, text).unwrap();
    let out = aoi(&["solve", "--config", s(&bad), "--out", s(&art)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("devices[0].weight"));
    assert_eq!(
        code(&aoi(&["reduce", "--config", s(&cfg), "--out", s(&art)])),
        2
    );

    // non-convergence
    let out = aoi(&[
        "solve",
        "--config",
        s(&cfg),
        "--out",
        s(&art),
        "--max-iter",
        "2",
    ]);
    assert_eq!(code(&out), 3);
    assert!(!art.exists());

    // structure violation in a tampered artifact
    assert_eq!(
        code(&aoi(&["solve", "--config", s(&cfg), "--out", s(&art)])),
        0
    );
    let Artifact::Full(mut full) = Artifact::read(&art).unwrap() else {
        panic!()
    };
    let kernel = full.kernel().unwrap();
    let top = kernel.space().compose(0, 5, 2);
    assert_ne!(full.policy[top], 0);
    full.policy[top] = 0;
    Artifact::Full(full).write(&art).unwrap();
    let out = aoi(&["verify-structure", "--artifact", s(&art)]);
    assert_eq!(code(&out), 4);
    assert!(stdout(&out).contains("threshold_consistency,1"));

    // missing input file
    assert_eq!(
        code(&aoi(&[
            "solve",
            "--config",
            "/nonexistent.json",
            "--out",
            s(&art)
        ])),
        1
    );
}
