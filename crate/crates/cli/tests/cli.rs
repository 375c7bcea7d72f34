use std::path::Path;
use std::process::{Command, Output};

use serde_json::json;

fn stohom(dir: &Path, args: &[&str], config: &serde_json::Value) -> Output {
    let cfg = dir.join("config.json");
    std::fs::write(&cfg, serde_json::to_string_pretty(config).unwrap()).unwrap();
    Command::new(env!("CARGO_BIN_EXE_stohom"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn csv(dir: &Path, name: &str) -> Vec<Vec<String>> {
    std::fs::read_to_string(dir.join(name))
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

fn column(table: &[Vec<String>], row: usize, name: &str) -> f64 {
    let col = table[0].iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    table[row][col].parse().unwrap()
}

fn boolean() -> serde_json::Value {
    json!({"model": "boolean", "intensity": 30.0, "radius": 0.05, "m": 64})
}

#[test]
fn lattice_generation_is_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = json!({"geometry": {"model": "lattice", "spacing": 0.5, "radius": 0.1, "m": 32}});
    for d in [&a, &b] {
        let o = stohom(d.path(), &["generate"], &cfg);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let read = |d: &tempfile::TempDir, f: &str| std::fs::read(d.path().join(f)).unwrap();
    assert_eq!(read(&a, "phase.shpf"), read(&b, "phase.shpf"));
    assert_eq!(read(&a, "generate.csv"), read(&b, "generate.csv"));
    assert_eq!(read(&a, "manifest.json"), read(&b, "manifest.json"));
    let manifest: serde_json::Value = serde_json::from_slice(&read(&a, "manifest.json")).unwrap();
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn boolean_seeds_differ_but_share_metadata() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = json!({"geometry": boolean()});
    assert!(stohom(a.path(), &["generate", "--seed", "1"], &cfg).status.success());
    assert!(stohom(b.path(), &["generate", "--seed", "2"], &cfg).status.success());
    let fa = std::fs::read(a.path().join("phase.shpf")).unwrap();
    let fb = std::fs::read(b.path().join("phase.shpf")).unwrap();
    assert_ne!(fa, fb);
    // magic, version, n, m, L agree; the seed field does not
    assert_eq!(fa[..24], fb[..24]);
    assert_ne!(fa[24..32], fb[24..32]);
    let stats = csv(a.path(), "generate.csv");
    assert_eq!(stats[0], ["seed", "theta", "s"]);
    assert_eq!(stats[1][0], "1");
}

#[test]
fn negative_intensity_is_a_config_error() {
    let d = tempfile::tempdir().unwrap();
    let o = stohom(d.path(), &["generate"], &json!({"geometry": {"model": "boolean", "intensity": -3.0, "radius": 0.05}}));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("intensity"), "{}", stderr(&o));
}

#[test]
fn unknown_and_missing_keys_are_rejected() {
    let d = tempfile::tempdir().unwrap();
    let o = stohom(d.path(), &["generate"], &json!({"geometry": {"model": "boolean", "intensity": 3.0, "radius": 0.05, "colour": 1}}));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("colour"));
    let o = stohom(d.path(), &["generate"], &json!({"geometry": {"model": "boolean", "intensity": 3.0}}));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("radius"));
    let o = stohom(d.path(), &["homogenize"], &json!({"geometry": boolean()}));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("homogenize"));
}

#[test]
fn homogenize_uniform_recovers_d_a() {
    let d = tempfile::tempdir().unwrap();
    let cfg = json!({"geometry": {"model": "uniform", "m": 32}, "homogenize": {"D_A": 2.5, "D_B": 1.0}});
    let o = stohom(d.path(), &["homogenize", "--vtk"], &cfg);
    assert!(o.status.success(), "{}", stderr(&o));
    let t = csv(d.path(), "homogenize.csv");
    assert_eq!(t[0].join(","), "seed,m,L,D_A,D_B,theta,D11,D12,D21,D22,res1,res2");
    assert!((column(&t, 1, "D11") - 2.5).abs() <= 1e-12);
    assert!((column(&t, 1, "D22") - 2.5).abs() <= 1e-12);
    assert!(column(&t, 1, "D12").abs() <= 1e-12);
    let vtk = std::fs::read_to_string(d.path().join("corrector_1.vtk")).unwrap();
    assert!(vtk.starts_with("# vtk DataFile Version 3.0"));
}

#[test]
fn all_solid_permeability_exits_with_percolation() {
    let d = tempfile::tempdir().unwrap();
    let cfg = json!({"geometry": {"model": "uniform", "m": 16, "features_phase": "B"}, "permeability": {}});
    let o = stohom(d.path(), &["permeability"], &cfg);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("percolation"), "{}", stderr(&o));
}

#[test]
fn blocked_phase_in_homogenize_exits_3() {
    let d = tempfile::tempdir().unwrap();
    let cfg = json!({
        "geometry": {"model": "layers", "axis": 0, "fraction": 0.5, "m": 16},
        "homogenize": {"D_A": 1.0, "D_B": 0.0}
    });
    let o = stohom(d.path(), &["homogenize"], &cfg);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn channel_permeability_csv() {
    let d = tempfile::tempdir().unwrap();
    let cfg = json!({"geometry": {"model": "channel", "wall_rows": 1, "m": 32}, "permeability": {"nu": 2.0}});
    let o = stohom(d.path(), &["permeability", "--vtk"], &cfg);
    assert!(o.status.success(), "{}", stderr(&o));
    let t = csv(d.path(), "permeability.csv");
    assert_eq!(t[0].join(","), "seed,m,L,nu,porosity,K11,K12,K21,K22,res_mom,res_div");
    let h: f64 = 31.0 / 32.0;
    assert!((column(&t, 1, "K11") - h.powi(3) / 24.0).abs() < 0.02 * h.powi(3) / 24.0);
    assert_eq!(column(&t, 1, "K22"), 0.0);
    assert!(d.path().join("velocity_1.vtk").exists() && d.path().join("pressure_1.vtk").exists());
}

#[test]
fn converge_on_lattice_has_zero_variance() {
    let d = tempfile::tempdir().unwrap();
    let cfg = json!({
        "geometry": {"model": "lattice", "spacing": 1.0, "radius": 0.3},
        "converge": {"observables": ["volume_fraction", "specific_surface", "Dhom"], "L": [1.0, 2.0], "resolution": 16, "seeds": 8, "D_B": 10.0}
    });
    let o = stohom(d.path(), &["converge"], &cfg);
    assert!(o.status.success(), "{}", stderr(&o));
    let t = csv(d.path(), "converge.csv");
    assert_eq!(t[0].join(","), "observable,L,m,seeds,mean,variance,reference,flag");
    assert_eq!(t.len(), 1 + 2 * 2 + 3 * 2);
    for row in &t[1..] {
        assert_eq!(row[5], "0", "{row:?}");
        assert_eq!(row[7], "ok");
    }
}

#[test]
fn converge_output_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = json!({
        "geometry": boolean(),
        "converge": {"observables": ["volume_fraction"], "L": [1.0, 2.0], "resolution": 32, "seeds": 8}
    });
    assert!(stohom(a.path(), &["converge", "--seed", "5"], &cfg).status.success());
    assert!(stohom(b.path(), &["converge", "--seed", "5", "--threads", "2"], &cfg).status.success());
    assert_eq!(std::fs::read(a.path().join("converge.csv")).unwrap(), std::fs::read(b.path().join("converge.csv")).unwrap());
}

#[test]
fn react_conserves_mass_and_reads_tensor_csv() {
    let d = tempfile::tempdir().unwrap();
    let hom = json!({"geometry": {"model": "uniform", "m": 16}, "homogenize": {"D_A": 0.7, "D_B": 1.0}});
    assert!(stohom(d.path(), &["homogenize"], &hom).status.success());
    let tensor = d.path().join("homogenize.csv");
    let cfg = json!({"react": {
        "family": "linear", "k": 2.0, "theta": 0.4, "s": 3.0,
        "Dhom": format!("from {}", tensor.display()),
        "bc": "neumann", "dt": 0.01, "T": 0.5, "stride": 10, "M": 16, "u0": 0.0, "bump": 1.0
    }});
    let o = stohom(d.path(), &["react", "--vtk"], &cfg);
    assert!(o.status.success(), "{}", stderr(&o));
    let t = csv(d.path(), "react.csv");
    assert_eq!(t[0].join(","), "t,mass_u,mass_U,total_mass,min_u,max_u");
    assert_eq!(t.len(), 1 + 6);
    let m0 = column(&t, 1, "total_mass");
    for r in 2..t.len() {
        assert!((column(&t, r, "total_mass") - m0).abs() < 1e-10 * m0.abs().max(1.0));
    }
    assert!(d.path().join("u_0005.vtk").exists());

    let bad = json!({"react": {"family": "linear", "k": 1.0, "theta": 1.5, "s": 1.0, "Dhom": [[1.0, 0.0], [0.0, 1.0]], "dt": 0.1, "T": 1.0}});
    let o = stohom(d.path(), &["react"], &bad);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("theta"));
}
