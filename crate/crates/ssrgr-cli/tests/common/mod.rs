use std::path::{Path, PathBuf};

use ssrgr::data::{self, DataFormat};

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_ssrgr")
}

pub fn write_blobs(
    dir: &Path,
    name: &str,
    classes: usize,
    per_class: usize,
    dim: usize,
    noise: f64,
    seed: u64,
) -> PathBuf {
    let ds = data::synthetic_blobs(classes, per_class, dim, noise, seed).unwrap();
    let path = dir.join(name);
    data::save_dataset(&ds, &path, DataFormat::Text).unwrap();
    path
}

pub fn write_file(dir: &Path, name: &str, content: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path
}

/// Minimal train config over a blobs file: 5 labeled per class held out by
/// the split, modest dictionary, short run.
pub fn blobs_config(dir: &Path, data: &Path, mode: &str, seed: u64) -> PathBuf {
    let content = format!(
        "[run]\n\
         mode = \"{mode}\"\n\
         data = \"{}\"\n\
         out_model = \"{}\"\n\
         out_report = \"{}\"\n\n\
         [split]\n\
         labeled_per_class = 5\n\
         seed = 4\n\n\
         [hyper]\n\
         dict_size = 25\n\
         outer_iters = 8\n\
         seed = {seed}\n",
        data.display(),
        dir.join("model.ssrm").display(),
        dir.join("report.json").display(),
    );
    write_file(dir, "run.toml", &content)
}
