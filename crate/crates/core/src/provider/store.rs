use std::collections::{BTreeMap, VecDeque};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::raster::{decode, EncodingKind, ImageBuffer};
use crate::synth::{image_id, layout_scene, scene_index, SceneSpec};

/// Full-resolution images held by the provider.
pub trait ImageStore: Send + Sync {
    /// Sorted image ids.
    fn ids(&self) -> Vec<String>;

    /// `(width, height)` without necessarily loading pixels.
    fn dims(&self, image_id: &str) -> Result<(u32, u32)>;

    fn load(&self, image_id: &str) -> Result<Arc<ImageBuffer>>;
}

/// Small most-recently-used cache of decoded images.
struct Cache {
    capacity: usize,
    items: Mutex<VecDeque<(String, Arc<ImageBuffer>)>>,
}

impl Cache {
    fn new(capacity: usize) -> Self {
        Self {
            capacity,
            items: Mutex::new(VecDeque::new()),
        }
    }

    fn get_or_load(
        &self,
        id: &str,
        load: impl FnOnce() -> Result<ImageBuffer>,
    ) -> Result<Arc<ImageBuffer>> {
        {
            let mut items = self.items.lock().expect("cache lock");
            if let Some(pos) = items.iter().position(|(k, _)| k == id) {
                let item = items.remove(pos).expect("position in range");
                let img = item.1.clone();
                items.push_front(item);
                return Ok(img);
            }
        }
        // Loading happens outside the lock; concurrent misses may load twice.
        let img = Arc::new(load()?);
        if self.capacity > 0 {
            let mut items = self.items.lock().expect("cache lock");
            if !items.iter().any(|(k, _)| k == id) {
                items.push_front((id.to_string(), img.clone()));
                items.truncate(self.capacity);
            }
        }
        Ok(img)
    }
}

/// Directory of `*.png` / `*.ppm` images; the id is the file stem.
pub struct DirStore {
    files: BTreeMap<String, (PathBuf, EncodingKind)>,
    cache: Cache,
}

impl DirStore {
    pub fn open(dir: &Path) -> Result<Self> {
        let read =
            std::fs::read_dir(dir).map_err(|e| Error::Corpus(format!("{}: {e}", dir.display())))?;
        let mut files = BTreeMap::new();
        for entry in read {
            let path = entry?.path();
            let kind = match path.extension().and_then(|e| e.to_str()) {
                Some("png") => EncodingKind::Png,
                Some("ppm") => EncodingKind::Ppm,
                _ => continue,
            };
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                files.insert(stem.to_string(), (path.clone(), kind));
            }
        }
        if files.is_empty() {
            return Err(Error::Corpus(format!(
                "{}: no .png or .ppm images",
                dir.display()
            )));
        }
        Ok(Self {
            files,
            cache: Cache::new(4),
        })
    }
}

impl ImageStore for DirStore {
    fn ids(&self) -> Vec<String> {
        self.files.keys().cloned().collect()
    }

    fn dims(&self, image_id: &str) -> Result<(u32, u32)> {
        let img = self.load(image_id)?;
        Ok((img.width(), img.height()))
    }

    fn load(&self, image_id: &str) -> Result<Arc<ImageBuffer>> {
        let (path, kind) = self
            .files
            .get(image_id)
            .ok_or_else(|| Error::NotFound(image_id.to_string()))?;
        self.cache
            .get_or_load(image_id, || decode(&std::fs::read(path)?, *kind))
    }
}

/// Renders scenes of a [`SceneSpec`] on demand.
pub struct SynthStore {
    spec: SceneSpec,
    indices: Vec<u32>,
    cache: Cache,
}

impl SynthStore {
    pub fn new(spec: SceneSpec, indices: impl IntoIterator<Item = u32>) -> Result<Self> {
        spec.validate()?;
        let mut indices: Vec<u32> = indices.into_iter().collect();
        indices.sort_unstable();
        indices.dedup();
        Ok(Self {
            spec,
            indices,
            cache: Cache::new(4),
        })
    }

    pub fn with_cache(mut self, capacity: usize) -> Self {
        self.cache = Cache::new(capacity);
        self
    }

    pub fn spec(&self) -> &SceneSpec {
        &self.spec
    }

    fn index_of(&self, id: &str) -> Result<u32> {
        scene_index(id)
            .filter(|i| self.indices.binary_search(i).is_ok())
            .ok_or_else(|| Error::NotFound(id.to_string()))
    }
}

impl ImageStore for SynthStore {
    fn ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.indices.iter().map(|&i| image_id(i)).collect();
        ids.sort();
        ids
    }

    fn dims(&self, image_id: &str) -> Result<(u32, u32)> {
        self.index_of(image_id)?;
        Ok((self.spec.width, self.spec.height))
    }

    fn load(&self, image_id: &str) -> Result<Arc<ImageBuffer>> {
        let index = self.index_of(image_id)?;
        self.cache
            .get_or_load(image_id, || Ok(layout_scene(&self.spec, index)?.render()))
    }
}

/// In-memory images, mostly for tests.
#[derive(Default)]
pub struct MemStore {
    images: BTreeMap<String, Arc<ImageBuffer>>,
}

impl MemStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: impl Into<String>, img: ImageBuffer) {
        self.images.insert(id.into(), Arc::new(img));
    }
}

impl ImageStore for MemStore {
    fn ids(&self) -> Vec<String> {
        self.images.keys().cloned().collect()
    }

    fn dims(&self, image_id: &str) -> Result<(u32, u32)> {
        let img = self.load(image_id)?;
        Ok((img.width(), img.height()))
    }

    fn load(&self, image_id: &str) -> Result<Arc<ImageBuffer>> {
        self.images
            .get(image_id)
            .cloned()
            .ok_or_else(|| Error::NotFound(image_id.to_string()))
    }
}
