use super::config::RunConfig;
use super::output::write_json;
use crate::augsearch::{group_search_space, GroupingReport, ImageShape, SearchOptions, TransformTuple};
use crate::data::{make_images, Dataset};
use crate::error::{Error, Result};

pub const SYNTHETIC_IMAGES: usize = 200;
pub const SYNTHETIC_SIDE: usize = 8;

fn images(cfg: &RunConfig) -> Result<Dataset> {
    match &cfg.data {
        super::config::DataSource::File { .. } => cfg.load_dataset(),
        super::config::DataSource::Blobs(_) => make_images(SYNTHETIC_IMAGES, SYNTHETIC_SIDE, cfg.seed),
    }
}

/// Groups the configured transform × magnitude grid by Fréchet distance and
/// writes `grouping.json`.
pub fn cmd_group_transforms(cfg: &RunConfig) -> Result<GroupingReport> {
    let ds = images(cfg)?;
    let shape = match cfg.group.image_height {
        Some(h) => {
            if h == 0 || ds.dim() % h != 0 {
                return Err(Error::Shape(format!(
                    "image height {h} does not divide {} pixels",
                    ds.dim()
                )));
            }
            ImageShape {
                height: h,
                width: ds.dim() / h,
            }
        }
        None => ImageShape::square(ds.dim())?,
    };
    let tuples = TransformTuple::grid(&cfg.group.transforms, &cfg.group.magnitudes)?;
    let opts = SearchOptions {
        embed_dim: cfg.group.embed_dim,
        embed_hidden: cfg.group.embed_hidden,
        num_groups: cfg.group.num_groups,
        seed: cfg.seed,
    };
    let report = group_search_space(ds.features(), shape, &tuples, opts)?;
    cfg.ensure_out_dir()?;
    write_json(&cfg.out_path("grouping.json"), &report)?;
    Ok(report)
}

pub fn format_groups(report: &GroupingReport) -> String {
    let mut out = format!("{:>5}  {:>23}  {:>7}  representative\n", "group", "distance band", "members");
    for g in &report.groups {
        out.push_str(&format!(
            "{:>5}  [{:>9.4e}, {:>9.4e}]  {:>7}  {}\n",
            g.id,
            g.band.0,
            g.band.1,
            g.members.len(),
            g.representative
        ));
    }
    out
}
