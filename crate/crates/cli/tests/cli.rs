use std::path::Path;
use std::process::{Command, Output};

fn mcsep(workdir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcsep"))
        .arg("--workdir")
        .arg(workdir)
        .args(["--config", "exp.cfg"])
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn error_line(out: &Output) -> Vec<String> {
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr).into_owned();
    assert_eq!(err.lines().count(), 1, "{err}");
    err.trim_end().split('\t').map(String::from).collect()
}

const CONFIG: &str = "\
# small, fast experiment
count = 3
duration = 0.2
win_len = 256
hop = 64
fft_size = 256
t60 = 0.1,0.2
hidden = 4
steps = 3
batch_size = 2
learning_rate = 0.01
sdr_filter_len = 16
";

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("exp.cfg"), CONFIG).unwrap();
    dir
}

#[test]
fn pipeline_is_reproducible() {
    let a = setup();
    let b = setup();
    for dir in [a.path(), b.path()] {
        ok(&mcsep(dir, &["datagen", "--seed", "5"]));
        ok(&mcsep(dir, &["oracle-eval", "--masks", "ibm,ipsm"]));
        ok(&mcsep(dir, &["train", "--checkpoint", "m.ckpt"]));
        ok(&mcsep(dir, &["eval", "--checkpoint", "m.ckpt"]));
    }
    for file in ["manifest.tsv", "m.ckpt", "m.ckpt.curve.tsv", "scores/m.tsv", "reports/m.json", "reports/oracle-ipsm.json"] {
        let x = std::fs::read(a.path().join(file)).unwrap();
        let y = std::fs::read(b.path().join(file)).unwrap();
        assert_eq!(x, y, "{file} differs between runs");
    }
    let manifest = std::fs::read_to_string(a.path().join("manifest.tsv")).unwrap();
    assert_eq!(manifest.lines().count(), 4);
    assert!(a.path().join("separated/oracle-ibm").is_dir());
}

#[test]
fn report_recomputes_from_scores() {
    let dir = setup();
    ok(&mcsep(dir.path(), &["datagen"]));
    ok(&mcsep(dir.path(), &["eval", "--mixture"]));
    let json = ok(&mcsep(dir.path(), &["report", "--json", "scores/mixture.tsv"]));
    let saved = std::fs::read_to_string(dir.path().join("reports/mixture.json")).unwrap();
    assert_eq!(json.trim(), saved.trim());
    let table = ok(&mcsep(dir.path(), &["report", "scores/mixture.tsv"]));
    assert!(table.contains("AVG"));
}

#[test]
fn width_mismatch_names_both_widths() {
    let dir = setup();
    ok(&mcsep(dir.path(), &["datagen"]));
    ok(&mcsep(dir.path(), &["train", "--features", "single", "--checkpoint", "s.ckpt"]));
    let out = mcsep(dir.path(), &["eval", "--features", "ipd-angle", "--checkpoint", "s.ckpt"]);
    let line = error_line(&out);
    assert_eq!(line[0], "error");
    assert_eq!(line[1], "width_mismatch");
    assert!(line[2].contains("129") && line[2].contains(&(129 * 15).to_string()), "{}", line[2]);
}

#[test]
fn empty_manifest_and_missing_files_fail_cleanly() {
    let dir = setup();
    std::fs::write(
        dir.path().join("manifest.tsv"),
        "id\tseed\tbucket\tangle_diff\tazimuths\tt60\tabsorption\tmix\trefs\n",
    )
    .unwrap();
    let line = error_line(&mcsep(dir.path(), &["oracle-eval"]));
    assert_eq!(line[1], "empty");
    assert!(!dir.path().join("reports").exists());
    let line = error_line(&mcsep(dir.path(), &["oracle-eval", "--manifest", "nope.tsv"]));
    assert_eq!(line[1], "missing_file");
    let line = error_line(&mcsep(dir.path(), &["--set", "bogus=1", "datagen"]));
    assert_eq!(line[1], "invalid_config");
}
