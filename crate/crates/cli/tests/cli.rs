use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn advda(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_advda"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

const SMALL: &str = r#"
seeds = [1, 2]
alphas = [0.5, 1.0]
lambdas = [0.0, 0.1]
models_dir = "models"

[data]
kind = "synth"
d = 4
n_source = 400
n_target = 300
shift = 0.5

[train]
epochs = 5

[adv]
steps = 3
"#;

fn body_without_timing(path: &Path) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    assert!(v["wall_time_seconds"].is_number());
    v.as_object_mut().unwrap().remove("wall_time_seconds");
    v
}

#[test]
fn five_way_reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("cfg.toml"), SMALL).unwrap();
    for out in ["a.json", "b.json"] {
        let o = advda(
            dir.path(),
            &["five-way", "--config", "cfg.toml", "--out", out, "--threads", "2"],
        );
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = body_without_timing(&dir.path().join("a.json"));
    assert_eq!(a, body_without_timing(&dir.path().join("b.json")));
    assert_eq!(a["body"]["test_accesses_during_selection"], 0);
    assert_eq!(a["body"]["selections"].as_array().unwrap().len(), 10);
    assert!(dir.path().join("models/DA_NT_NT_seed2.toml").exists());
}

#[test]
fn overrides_reach_the_report() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("cfg.toml"), SMALL).unwrap();
    let o = advda(
        dir.path(),
        &[
            "five-way",
            "--config",
            "cfg.toml",
            "--seed",
            "9",
            "--alpha-grid",
            "0.25",
            "--lambda-grid",
            "0,1,2",
            "--epsilon",
            "0.05",
            "--steps",
            "2",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let cfg = &report["header"]["config"];
    assert_eq!(cfg["seeds"], serde_json::json!([9]));
    assert_eq!(cfg["alphas"], serde_json::json!([0.25]));
    assert_eq!(cfg["lambdas"], serde_json::json!([0.0, 1.0, 2.0]));
    assert_eq!(cfg["adv"]["epsilon"], 0.05);
    assert_eq!(cfg["adv"]["steps"], 2);
    // 2 baselines + 3 λ + 2·(1 α · 3 λ)
    assert_eq!(report["body"]["entries"].as_array().unwrap().len(), 11);
}

#[test]
fn synth_then_csv_driven_runs_and_eval() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(
        p.join("gen.toml"),
        "[data]\nkind = \"synth\"\nd = 3\nn_source = 300\nn_target = 200\nshift = 1.0\n",
    )
    .unwrap();
    assert_eq!(
        code(&advda(
            p,
            &["synth", "--config", "gen.toml", "--seed", "4", "--out", "data"]
        )),
        0
    );
    let header = fs::read_to_string(p.join("data/domains.csv")).unwrap();
    assert!(header.starts_with("x0,x1,x2,y0,group\n"));
    assert!(p.join("data/truth.toml").exists());

    fs::create_dir(p.join("conf")).unwrap();
    fs::write(
        p.join("conf/run.toml"),
        "seeds = [0]\nalphas = [1.0]\nlambdas = [0.0]\nmodels_dir = \"models\"\n\
         [data]\nkind = \"csv\"\npath = \"../data/domains.csv\"\ndomains = [\"source\", \"target\"]\n\
         [train]\nepochs = 5\n",
    )
    .unwrap();
    // Data paths resolve against the config's directory, not the working directory.
    let o = advda(p, &["shift-matrix", "--config", "conf/run.toml", "--out", "sm.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let sm: serde_json::Value = serde_json::from_str(&fs::read_to_string(p.join("sm.json")).unwrap()).unwrap();
    assert_eq!(
        sm["body"]["train_domains"],
        serde_json::json!(["source", "target", "all"])
    );

    let o = advda(p, &["sparsity", "--config", "conf/run.toml"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let sp: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(sp["body"]["seeds"][0]["weights"].as_array().unwrap().len(), 3);

    assert_eq!(code(&advda(p, &["five-way", "--config", "conf/run.toml"])), 0);
    let o = advda(
        p,
        &[
            "eval",
            "--model",
            "models/DA_AT_AT_seed0.toml",
            "--data",
            "data/target.csv",
            "--out",
            "m.json",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(p.join("m.json")).unwrap()).unwrap();
    assert_eq!(m["metric_name"], "auroc");
    assert_eq!(m["n_eval"], 200);
}

#[test]
fn featurize_writes_714_columns_for_17_variables() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    for (name, los) in [("ep1", 30.0), ("ep2", 400.0)] {
        let mut text = String::from("variable,time_hours,value\n");
        for v in 0..17 {
            text.push_str(&format!("var{v},{},{}\n", 1.5, v as f64));
            text.push_str(&format!("var{v},{},{}\n", 40.0, 2.0 * v as f64));
        }
        fs::write(p.join(format!("{name}.csv")), text).unwrap();
        fs::write(
            p.join(format!("{name}.toml")),
            format!("length_hours = 48.0\nlos_hours = {los}\n"),
        )
        .unwrap();
    }
    let o = advda(p, &["featurize", "ep1.csv", "ep2.csv", "--out", "features.csv"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(p.join("features.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), 714 + 2);
    assert_eq!(header[0], "var0_full_min");
    assert_eq!(&header[714..], &["y0", "episode"]);
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    // length of stay 30 h → bucket 1, 400 h → bucket 9
    assert_eq!((rows[0][714], rows[1][714]), ("1", "9"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();

    fs::write(p.join("bad.toml"), "seeds = []\n").unwrap();
    assert_eq!(code(&advda(p, &["five-way", "--config", "bad.toml"])), 2);
    assert_eq!(code(&advda(p, &["five-way", "--config", "missing.toml"])), 2);
    assert_eq!(code(&advda(p, &["five-way", "--alpha-grid", "0,1"])), 2);
    assert_eq!(code(&advda(p, &["five-way", "--no-such-flag"])), 2);
    assert_eq!(code(&advda(p, &["sparsity", "--steps", "0"])), 2);

    fs::write(p.join("broken.csv"), "x0,y0\n1,0\nabc,1\n").unwrap();
    fs::write(
        p.join("files.toml"),
        "[data]\nkind = \"files\"\nfiles = [{ name = \"a\", path = \"broken.csv\" }, { name = \"b\", path = \"broken.csv\" }]\n",
    )
    .unwrap();
    assert_eq!(code(&advda(p, &["shift-matrix", "--config", "files.toml"])), 3);

    // A model, then a dataset whose labels are all 0: AUROC is undefined.
    assert_eq!(code(&advda(p, &["synth", "--out", "data"])), 0);
    fs::write(p.join("m.toml"), SMALL.replace("n_source = 400", "n_source = 100")).unwrap();
    assert_eq!(code(&advda(p, &["five-way", "--config", "m.toml", "--seed", "1"])), 0);
    let mut one_class = String::from("x0,x1,x2,x3,y0\n");
    for i in 0..20 {
        one_class.push_str(&format!("{i},1,2,3,0\n"));
    }
    fs::write(p.join("one.csv"), one_class).unwrap();
    let o = advda(
        p,
        &["eval", "--model", "models/NT_target_seed1.toml", "--data", "one.csv"],
    );
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    // Column mismatch between model and data is a data error.
    let o = advda(
        p,
        &[
            "eval",
            "--model",
            "models/NT_target_seed1.toml",
            "--data",
            "data/source.csv",
        ],
    );
    assert_eq!(code(&o), 3);
}
