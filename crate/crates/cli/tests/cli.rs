use std::process::Command;

fn sim() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_manet-sim"));
    c.env_remove("MANET_WORKERS");
    c
}

#[test]
fn sweep_run_writes_table_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = sim()
        .args(["--protocol", "aodv,gf:0.4,mp", "--sweep", "dest_distance=0.3,0.6"])
        .args(["--topologies", "2", "--trials-per-layer", "2", "--seed", "11", "--workers", "1"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(dir.path().join("sweep_dest_distance.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 7);
    assert!(lines[0].starts_with("dest_distance,protocol,reliability,"));
    assert!(lines[1].starts_with("0.3,aodv,"));
    let manifest = std::fs::read_to_string(dir.path().join("manifest.toml")).unwrap();
    assert!(manifest.starts_with("# generated"));
    assert!(manifest.contains("seed = 11"));
    assert!(manifest.contains("trials = 2"));

    // Replaying the manifest with another worker count reproduces the table.
    let again = tempfile::tempdir().unwrap();
    let out = sim()
        .arg("--config")
        .arg(dir.path().join("manifest.toml"))
        .arg("--out")
        .arg(again.path())
        .env("MANET_WORKERS", "3")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(table, std::fs::read_to_string(again.path().join("sweep_dest_distance.csv")).unwrap());
}

#[test]
fn bad_arguments_fail_with_a_message() {
    let out = sim().args(["--sweep", "mu=0.5,1.5"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("mu"));

    let out = sim().args(["--protocol", "ospf"]).output().unwrap();
    assert!(!out.status.success());

    let out = sim().args(["--workers", "0", "--topologies", "1"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn exported_topology_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("topo.txt");
    let out = sim().arg("--export-topology").arg(&file).args(["--seed", "3"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&file).unwrap();
    let t = manet_core::topology::Topology::from_table(&text).unwrap();
    assert_eq!(t.mobiles(), 200);
}
