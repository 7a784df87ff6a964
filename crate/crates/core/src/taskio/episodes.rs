//! Dataset index and class-based episode sampling.
//!
//! Index files are UTF-8, one record per line:
//! `<class_id>\t<image_id>\t<relative_path>`, with paths relative to the
//! index file's directory. Blank lines and lines starting with `#` are
//! skipped.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::Rng as _;

use super::container::read_container;
use super::tasks::image_from_container;
use crate::error::{RepriError, Result};
use crate::rng::{rng_from_seed, sub_seed};
use crate::types::TaskInstance;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexRecord {
    pub class_id: u32,
    pub image_id: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetIndex {
    root: PathBuf,
    records: Vec<IndexRecord>,
}

impl DatasetIndex {
    /// Parses index text; `root` is the directory paths are relative to.
    pub fn parse(text: &str, root: impl Into<PathBuf>) -> Result<Self> {
        let mut records = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [class, image, path] = fields[..] else {
                return Err(RepriError::invalid(
                    "dataset index",
                    format!("line {}: expected 3 tab-separated fields", n + 1),
                ));
            };
            let class_id = class.trim().parse().map_err(|_| {
                RepriError::invalid("dataset index", format!("line {}: bad class id '{class}'", n + 1))
            })?;
            records.push(IndexRecord {
                class_id,
                image_id: image.to_string(),
                path: PathBuf::from(path),
            });
        }
        Ok(Self {
            root: root.into(),
            records,
        })
    }

    /// Loads an index file and checks every referenced container parses.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let index = Self::parse(&text, root)?;
        for r in &index.records {
            index.load_image(r)?;
        }
        Ok(index)
    }

    pub fn records(&self) -> &[IndexRecord] {
        &self.records
    }

    pub fn to_text(&self) -> String {
        self.records
            .iter()
            .map(|r| format!("{}\t{}\t{}\n", r.class_id, r.image_id, r.path.display()))
            .collect()
    }

    /// Record indices grouped by class, in ascending class order.
    fn by_class(&self) -> BTreeMap<u32, Vec<usize>> {
        let mut map: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for (i, r) in self.records.iter().enumerate() {
            map.entry(r.class_id).or_default().push(i);
        }
        map
    }

    fn load_image(&self, r: &IndexRecord) -> Result<(crate::types::FeatureMap, crate::types::PixelMask)> {
        image_from_container(&read_container(self.root.join(&r.path))?)
    }
}

/// Episode sampler over a dataset index.
#[derive(Debug, Clone)]
pub struct EpisodeSampler {
    index: DatasetIndex,
    classes: Vec<(u32, Vec<usize>)>,
    shots: usize,
}

impl EpisodeSampler {
    pub fn new(index: DatasetIndex, shots: usize) -> Result<Self> {
        if shots == 0 {
            return Err(RepriError::invalid("EpisodeSampler", "shots must be >= 1"));
        }
        let classes: Vec<(u32, Vec<usize>)> = index.by_class().into_iter().collect();
        if classes.is_empty() {
            return Err(RepriError::invalid("EpisodeSampler", "index has no records"));
        }
        for (class, imgs) in &classes {
            if imgs.len() < shots + 1 {
                return Err(RepriError::InsufficientImages {
                    class: *class,
                    available: imgs.len(),
                    needed: shots + 1,
                });
            }
        }
        Ok(Self {
            index,
            classes,
            shots,
        })
    }

    /// Picks a class uniformly, then `shots + 1` distinct images of it: the
    /// first `shots` are supports, the last is the query.
    pub fn pick(&self, seed: u64) -> (u32, Vec<&IndexRecord>) {
        let mut rng = rng_from_seed(seed);
        let c = rng.random_range(0..self.classes.len() as u64) as usize;
        let (class, imgs) = &self.classes[c];
        let chosen = index::sample(&mut rng, imgs.len(), self.shots + 1);
        let records = chosen
            .iter()
            .map(|i| &self.index.records[imgs[i]])
            .collect();
        (*class, records)
    }

    pub fn episode(&self, seed: u64) -> Result<(u32, TaskInstance)> {
        let (class, records) = self.pick(seed);
        let mut images = records
            .iter()
            .map(|r| self.index.load_image(r))
            .collect::<Result<Vec<_>>>()?;
        let (query, query_gt) = images.pop().expect("at least two images");
        Ok((class, TaskInstance::new(images, query, Some(query_gt))?))
    }
}

/// `n_tasks` episodes; episode `i` depends only on `(seed, i)`.
pub fn sample_episodes(
    index: &DatasetIndex,
    shots: usize,
    n_tasks: usize,
    seed: u64,
) -> Result<Vec<(u32, TaskInstance)>> {
    let sampler = EpisodeSampler::new(index.clone(), shots)?;
    (0..n_tasks)
        .map(|i| sampler.episode(sub_seed(seed, &[i as u64])))
        .collect()
}
