use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use slipinv::config::PipelineConfig;
use slipinv::design::DesignKind;
use slipinv::fit::FitMethod;
use slipinv::pipeline::{self, Layout};
use slipinv::Error;

const TINY: &str = r#"
workers = 1
[model]
nx = 30
ny = 24
t_end_s = 2400.0
output_dt_s = 240.0
[basis]
order = 2
[design]
smolyak_level = 2
lhs_samples = 40
[validate]
cdf_samples = 200
[mcmc]
iterations = 3000
init_candidates = 20
checkpoint_every = 1000
"#;

fn tiny() -> PipelineConfig {
    let cfg: PipelineConfig = toml::from_str(TINY).unwrap();
    cfg.validate().unwrap();
    cfg
}

fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(dir: &Path, root: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                walk(&p, root, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn run_all(cfg: &PipelineConfig, layout: &Layout) {
    pipeline::cmd_design(cfg, layout, &[DesignKind::Smolyak, DesignKind::Lhs]).unwrap();
    pipeline::cmd_ensemble(cfg, layout, DesignKind::Smolyak).unwrap();
    pipeline::cmd_ensemble(cfg, layout, DesignKind::Lhs).unwrap();
    let nisp = pipeline::cmd_fit(cfg, layout, FitMethod::Nisp, 2).unwrap();
    let bpdn = pipeline::cmd_fit(cfg, layout, FitMethod::Bpdn, 2).unwrap();
    pipeline::cmd_validate(cfg, layout, &nisp).unwrap();
    pipeline::cmd_validate(cfg, layout, &bpdn).unwrap();
    pipeline::cmd_moments(cfg, layout, &bpdn).unwrap();
    pipeline::cmd_sweep(cfg, layout).unwrap();
    pipeline::cmd_twin(cfg, layout).unwrap();
}

#[test]
fn full_pipeline_is_byte_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = tiny();
    run_all(&cfg, &Layout::new(a.path()));
    let mut cfg2 = cfg.clone();
    cfg2.workers = 2;
    run_all(&cfg2, &Layout::new(b.path()));
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    assert_eq!(sa.keys().collect::<Vec<_>>(), sb.keys().collect::<Vec<_>>());
    for (k, v) in &sa {
        assert!(v == &sb[k], "{} differs between runs", k.display());
    }
    for f in ["twin/twin_report.csv", "twin/chain.csv", "validate/nisp-p2/nre.csv", "sweep/sweep.csv", "moments/bpdn-p2/bands.csv"] {
        assert!(sa.contains_key(Path::new(f)), "missing {f}");
    }

    // A rerun of one stage in place reproduces its files.
    let layout = Layout::new(a.path());
    pipeline::cmd_fit(&cfg, &layout, FitMethod::Nisp, 2).unwrap();
    assert_eq!(snapshot(a.path()), sa);
}

#[test]
fn every_manifest_records_config_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny();
    let layout = Layout::new(dir.path());
    pipeline::cmd_design(&cfg, &layout, &[DesignKind::Lhs]).unwrap();
    pipeline::cmd_ensemble(&cfg, &layout, DesignKind::Lhs).unwrap();
    let fit = pipeline::cmd_fit(&cfg, &layout, FitMethod::Bpdn, 1).unwrap();
    for path in [layout.design_manifest(DesignKind::Lhs), layout.ensemble_dir(DesignKind::Lhs).join("manifest.txt"), fit.join("manifest.txt")] {
        let m = slipinv::io::Manifest::read(&path).unwrap();
        assert_eq!(m.get("config_hash"), Some(cfg.hash().as_str()), "{}", path.display());
    }
    let m = slipinv::io::Manifest::read(&layout.design_manifest(DesignKind::Lhs)).unwrap();
    assert_eq!(m.get("seed"), Some("7"));
}

#[test]
fn fit_refuses_ensemble_from_another_design() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny();
    let layout = Layout::new(dir.path());
    pipeline::cmd_design(&cfg, &layout, &[DesignKind::Lhs]).unwrap();
    pipeline::cmd_ensemble(&cfg, &layout, DesignKind::Lhs).unwrap();
    let ensemble_before = snapshot(&layout.ensemble_dir(DesignKind::Lhs));

    let mut reseeded = cfg.clone();
    reseeded.design.lhs_seed = 99;
    pipeline::cmd_design(&reseeded, &layout, &[DesignKind::Lhs]).unwrap();
    let err = pipeline::cmd_fit(&reseeded, &layout, FitMethod::Bpdn, 1).unwrap_err();
    assert!(matches!(err, Error::Integrity(_)), "{err}");
    assert_eq!(err.exit_code(), 4);
    assert_eq!(snapshot(&layout.ensemble_dir(DesignKind::Lhs)), ensemble_before);

    // A changed forward model is refused too.
    pipeline::cmd_design(&cfg, &layout, &[DesignKind::Lhs]).unwrap();
    let mut remodeled = cfg.clone();
    remodeled.model.output_dt_s = 120.0;
    assert!(matches!(pipeline::cmd_fit(&remodeled, &layout, FitMethod::Bpdn, 1), Err(Error::Integrity(_))));
    pipeline::cmd_fit(&cfg, &layout, FitMethod::Bpdn, 1).unwrap();
}

#[test]
fn tampered_design_file_is_detected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny();
    let layout = Layout::new(dir.path());
    pipeline::cmd_design(&cfg, &layout, &[DesignKind::Lhs]).unwrap();
    let csv = layout.design_csv(DesignKind::Lhs);
    let text = fs::read_to_string(&csv).unwrap().replacen('1', "2", 1);
    fs::write(&csv, text).unwrap();
    assert!(matches!(pipeline::cmd_ensemble(&cfg, &layout, DesignKind::Lhs), Err(Error::Integrity(_))));
}

#[test]
fn deleting_downstream_leaves_upstream_intact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny();
    let layout = Layout::new(dir.path());
    pipeline::cmd_design(&cfg, &layout, &[DesignKind::Lhs]).unwrap();
    pipeline::cmd_ensemble(&cfg, &layout, DesignKind::Lhs).unwrap();
    let upstream = (snapshot(&dir.path().join("design")), snapshot(&dir.path().join("ensemble")));
    let fit = pipeline::cmd_fit(&cfg, &layout, FitMethod::Bpdn, 1).unwrap();
    fs::remove_dir_all(&fit).unwrap();
    assert_eq!((snapshot(&dir.path().join("design")), snapshot(&dir.path().join("ensemble"))), upstream);
    pipeline::cmd_fit(&cfg, &layout, FitMethod::Bpdn, 1).unwrap();
}

#[test]
fn observations_round_trip_and_infer() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny();
    let layout = Layout::new(dir.path());
    pipeline::cmd_design(&cfg, &layout, &[DesignKind::Lhs]).unwrap();
    pipeline::cmd_ensemble(&cfg, &layout, DesignKind::Lhs).unwrap();
    let fit = pipeline::cmd_fit(&cfg, &layout, FitMethod::Bpdn, 2).unwrap();
    let obs = pipeline::synthetic_observations(&cfg).unwrap();
    let path = dir.path().join("obs.csv");
    pipeline::write_observations(&path, &obs).unwrap();
    let back = pipeline::read_observations(&path).unwrap();
    assert_eq!(back, obs);
    let report = pipeline::cmd_infer(&cfg, &layout, &fit, &path).unwrap();
    assert_eq!(report.parameters.len(), 10);
    for p in &report.parameters {
        assert!(p.hpd.0 <= p.hpd.1);
    }
    assert!(dir.path().join("infer/summary.csv").exists());
    assert!(dir.path().join("infer/moment.txt").exists());
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_slipinv")).args(args).env("RUST_LOG", "error").output().unwrap()
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let cfg = dir.path().join("tiny.toml");
    fs::write(&cfg, TINY).unwrap();
    let cfg = cfg.to_str().unwrap();

    let ok = cli(&["-c", cfg, "-o", out, "design", "--kind", "lhs"]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[mcmc]\nburn_in = 2.0\n").unwrap();
    assert_eq!(cli(&["-c", bad.to_str().unwrap(), "-o", out, "design"]).status.code(), Some(2));
    fs::write(&bad, "[nonsense]\n").unwrap();
    assert_eq!(cli(&["-c", bad.to_str().unwrap(), "-o", out, "design"]).status.code(), Some(2));

    // Missing upstream stage.
    let missing = cli(&["-c", cfg, "-o", out, "fit", "--method", "bpdn", "--order", "1"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("manifest.txt"));

    assert!(cli(&["-c", cfg, "-o", out, "ensemble", "--kind", "lhs"]).status.success());
    assert!(cli(&["-c", cfg, "-o", out, "--lhs-seed", "5", "design", "--kind", "lhs"]).status.success());
    let refused = cli(&["-c", cfg, "-o", out, "--lhs-seed", "5", "fit", "--method", "bpdn", "--order", "1"]);
    assert_eq!(refused.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&refused.stderr).contains("rerun"));

    let printed = cli(&["-c", cfg, "init-config"]);
    let parsed: PipelineConfig = toml::from_str(&String::from_utf8_lossy(&printed.stdout)).unwrap();
    assert_eq!(parsed, tiny());
}
