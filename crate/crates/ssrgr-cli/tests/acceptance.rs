mod common;

use std::process::Command;

fn report(criterion: &str, failures: Vec<String>) {
    if failures.is_empty() {
        println!("[PASS] {criterion}");
    } else {
        println!("[FAIL] {criterion}");
        panic!("{criterion}: {}", failures.join("; "));
    }
}

#[test]
fn criterion_10_seeded_runs_produce_identical_model_files() {
    let mut failures = Vec::new();
    let dir = tempfile::tempdir().unwrap();
    let data = common::write_blobs(dir.path(), "blobs.txt", 3, 15, 8, 0.2, 67);
    let cfg_path = common::write_file(
        dir.path(),
        "run.toml",
        &format!(
            "[run]\ndata = \"{}\"\nout_report = \"{}\"\n\
             [split]\nlabeled_per_class = 4\n\
             [hyper]\ndict_size = 20\nouter_iters = 6\nseed = 23\n",
            data.display(),
            dir.path().join("report.json").display(),
        ),
    );

    for mode in ["linear", "kernel"] {
        let model = dir.path().join(format!("{mode}.ssrm"));
        let mut runs = Vec::new();
        for _ in 0..2 {
            let output = Command::new(common::bin())
                .args(["train", "--config"])
                .arg(&cfg_path)
                .args(["--mode", mode, "--out"])
                .arg(&model)
                .output()
                .unwrap();
            if output.status.success() {
                runs.push(std::fs::read(&model).unwrap());
            } else {
                failures.push(format!(
                    "{mode} train run failed: {}",
                    String::from_utf8_lossy(&output.stderr)
                ));
            }
        }
        if let [a, b] = runs.as_slice() {
            if a != b {
                failures.push(format!(
                    "{mode} model files differ ({} vs {} bytes)",
                    a.len(),
                    b.len()
                ));
            } else {
                println!("  {mode} model files identical ({} bytes)", a.len());
            }
        }
    }

    report(
        "criterion 10: two identically seeded end-to-end runs write bitwise-identical model files",
        failures,
    );
}
