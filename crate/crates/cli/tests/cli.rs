use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn run(args: &[&str], pin: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_morphvault"));
    cmd.args(args).env_remove("DSV_DIR").env_remove("DSV_PIN");
    if let Some(p) = pin {
        cmd.env("DSV_PIN", p);
    }
    cmd.output().unwrap()
}

fn err(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn init(dir: &Path) {
    let o = run(&["vault", "--vault", dir.to_str().unwrap(), "init", "--kdf-t", "1", "--kdf-m", "64"], Some("1234"));
    assert!(o.status.success(), "{}", err(&o));
}

#[test]
fn inspect_prints_package_label_and_icons() {
    let o = run(&["morph", "inspect", fixture("fixture.apk").to_str().unwrap()], None);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("package: org.example.fixture"));
    assert!(text.contains("label: FixtureApp"));
    assert_eq!(text.matches("ic_launcher.png").count(), 3);
}

#[test]
fn inspect_json_is_stable() {
    let apk = fixture("fixture.apk");
    let args = ["morph", "inspect", apk.to_str().unwrap(), "--json"];
    let (a, b) = (run(&args, None), run(&args, None));
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["icon_resource_id"], 0x7f03_0000);
    assert_eq!(v["label"]["kind"], "text");
}

#[test]
fn last_name_wins_and_too_long_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out.apk");
    let o = run(
        &[
            "morph", "apply", fixture("fixture.apk").to_str().unwrap(), "-o", out.to_str().unwrap(),
            "--name", "Notes", "--label-mode", "inplace", "--name", "This name is far too long for the slot",
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(err(&o).contains("NameTooLong"), "{}", err(&o));
    assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 0, "partial output left behind");
}

#[test]
fn usage_errors_exit_2() {
    let apk = fixture("fixture.apk");
    for args in [
        vec!["morph", "apply", apk.to_str().unwrap()],
        vec!["morph", "apply", apk.to_str().unwrap(), "-o", "x.apk", "--icon-density", "tvdpi=a.png"],
        vec!["morph", "frobnicate"],
        vec!["vault", "status"],
    ] {
        assert_eq!(run(&args, None).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn verify_unsigned_is_domain_error() {
    let o = run(&["morph", "verify", fixture("fixture.apk").to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(err(&o).contains("NotSigned"));
}

#[test]
fn unlock_unknown_entry() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("d");
    init(&d);
    let o = run(&["vault", "unlock", "nosuch", "--vault", d.to_str().unwrap()], Some("1234"));
    assert_eq!(o.status.code(), Some(1));
    assert!(err(&o).contains("EntryNotFound"), "{}", err(&o));
}

#[test]
fn vault_without_pin_on_pipe_is_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("d");
    init(&d);
    let o = run(&["vault", "--vault", d.to_str().unwrap(), "status"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(err(&o).contains("DSV_PIN"));
}

#[test]
fn lock_status_unlock_via_cli() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("d");
    init(&d);
    let file = tmp.path().join("memo.txt");
    fs::write(&file, b"private").unwrap();
    let vault = d.to_str().unwrap();

    let o = run(&["vault", "--vault", vault, "lock", file.to_str().unwrap()], Some("1234"));
    assert!(o.status.success(), "{}", err(&o));
    assert!(!file.exists());

    let o = run(&["vault", "--vault", vault, "status", "--json"], Some("1234"));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["entries"][0]["original_name"], "memo.txt");
    assert_eq!(v["entries"][0]["state"], "Locked");
    assert_eq!(v["locked"], 1);

    let o = run(&["vault", "--vault", vault, "unlock", "memo.txt"], Some("9999"));
    assert_eq!(o.status.code(), Some(1));
    assert!(err(&o).contains("PinRejected"));

    let o = run(&["vault", "--vault", vault, "unlock", "memo.txt"], Some("1234"));
    assert!(o.status.success());
    assert_eq!(fs::read(d.join("open/memo.txt")).unwrap(), b"private");
}

#[test]
fn live_owner_lock_blocks_second_process() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("d");
    init(&d);
    // pid 1 is always alive
    fs::write(d.join(".dsv.lock"), "1").unwrap();
    let o = run(&["vault", "--vault", d.to_str().unwrap(), "status"], Some("1234"));
    assert_eq!(o.status.code(), Some(1));
    assert!(err(&o).contains("VaultBusy"), "{}", err(&o));
}
