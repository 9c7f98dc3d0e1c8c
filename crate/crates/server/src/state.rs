use std::collections::HashMap;
use std::sync::{Arc, Mutex, MutexGuard, RwLock};

use earmark_core::gallery::GalleryBuild;
use earmark_core::{ContourEngine, DescriptorIndex, SeekSchema};
use earmark_ingest::FeedClient;
use earmark_registry::{PhotoStore, Registry};

use crate::auth::ApiSession;
use crate::config::{ConfigError, ServerConfig};
use crate::error::ApiError;

#[derive(Debug, thiserror::Error)]
pub enum StartupError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Registry(#[from] earmark_registry::RegistryError),
    #[error(transparent)]
    Photos(#[from] earmark_registry::PhotoError),
    #[error(transparent)]
    Feed(#[from] earmark_ingest::FeedError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// Gallery and descriptor index for one gallery version of the registry.
#[derive(Debug)]
pub struct MatchSnapshot {
    pub gallery_version: u64,
    /// Index generation; 0 before the first build.
    pub generation: u64,
    pub build: GalleryBuild,
    pub index: Option<DescriptorIndex>,
}

pub struct AppState {
    pub config: ServerConfig,
    schema: SeekSchema,
    engine: ContourEngine,
    registry: Mutex<Registry>,
    photos: PhotoStore,
    feed: Option<FeedClient>,
    sessions: HashMap<String, ApiSession>,
    snapshot: RwLock<Arc<MatchSnapshot>>,
    rebuild: tokio::sync::Mutex<()>,
}

impl AppState {
    /// Opens the registry and photo store named by the config.
    pub fn open(config: ServerConfig) -> Result<AppState, StartupError> {
        config.validate()?;
        let schema = config.load_schema()?;
        let registry = match &config.registry_path {
            Some(path) => {
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir)?;
                }
                Registry::open(path, schema)?
            }
            None => Registry::in_memory(schema),
        };
        AppState::with_registry(config, registry)
    }

    /// Serves an already opened registry; its schema is authoritative.
    pub fn with_registry(config: ServerConfig, registry: Registry) -> Result<AppState, StartupError> {
        config.validate()?;
        let schema = registry.schema().clone();
        if let Some(v) = config.schema_version {
            if v != schema.version {
                return Err(ConfigError::Invalid(format!(
                    "schema_version {v} requested, registry uses version {}",
                    schema.version
                ))
                .into());
            }
        }
        let engine = ContourEngine::new(config.contour.clone())
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let photos = PhotoStore::open(&config.photo_dir)?;
        let feed = config.feed.clone().map(FeedClient::new).transpose()?;
        let sessions = config
            .users
            .iter()
            .map(|u| {
                let session = ApiSession {
                    user: u.id.clone(),
                    role: u.role,
                    token: u.token.clone(),
                };
                (u.token.clone(), session)
            })
            .collect();
        let empty = MatchSnapshot {
            gallery_version: u64::MAX,
            generation: 0,
            build: GalleryBuild {
                gallery: Default::default(),
                descriptors: Vec::new(),
            },
            index: None,
        };
        Ok(AppState {
            config,
            schema,
            engine,
            registry: Mutex::new(registry),
            photos,
            feed,
            sessions,
            snapshot: RwLock::new(Arc::new(empty)),
            rebuild: tokio::sync::Mutex::new(()),
        })
    }

    pub fn schema(&self) -> &SeekSchema {
        &self.schema
    }

    pub fn engine(&self) -> &ContourEngine {
        &self.engine
    }

    pub fn photos(&self) -> &PhotoStore {
        &self.photos
    }

    pub fn feed(&self) -> Result<&FeedClient, ApiError> {
        self.feed.as_ref().ok_or(ApiError::FeedNotConfigured)
    }

    pub fn session(&self, token: &str) -> Option<ApiSession> {
        self.sessions.get(token).cloned()
    }

    /// Registry access. Never hold the guard across an await point.
    pub fn registry(&self) -> MutexGuard<'_, Registry> {
        // A panic mid-operation cannot leave a half-applied batch behind:
        // commits swap in a fully applied state or nothing.
        self.registry.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn current_snapshot(&self) -> Arc<MatchSnapshot> {
        self.snapshot.read().unwrap_or_else(|p| p.into_inner()).clone()
    }

    /// Snapshot matching the registry's current gallery, rebuilt when the
    /// gallery changed since the last build. Queries already holding the
    /// previous snapshot finish on it.
    pub async fn match_snapshot(&self) -> Result<Arc<MatchSnapshot>, ApiError> {
        let wanted = self.registry().state().gallery_version;
        let snap = self.current_snapshot();
        if snap.gallery_version == wanted {
            return Ok(snap);
        }
        self.rebuild_snapshot(false).await
    }

    /// Builds a new generation. Unless `force`, a rebuild that another
    /// request already finished is reused.
    pub async fn rebuild_snapshot(&self, force: bool) -> Result<Arc<MatchSnapshot>, ApiError> {
        let _guard = self.rebuild.lock().await;
        let (dump, gallery_version) = {
            let reg = self.registry();
            let gv = reg.state().gallery_version;
            let current = self.current_snapshot();
            if !force && current.gallery_version == gv {
                return Ok(current);
            }
            (reg.export_dump(false), gv)
        };
        let generation = self.current_snapshot().generation + 1;
        let schema = self.schema.clone();
        let engine = self.engine.clone();
        let snap = tokio::task::spawn_blocking(move || -> Result<MatchSnapshot, ApiError> {
            let build = GalleryBuild::from_dump(&dump, &schema, &engine)?;
            let index = build
                .index(schema.version, generation)
                .map_err(|e| ApiError::Gallery(e.into()))?;
            Ok(MatchSnapshot {
                gallery_version,
                generation,
                build,
                index,
            })
        })
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
        let snap = Arc::new(snap);
        tracing::info!(generation, gallery_version, "match index rebuilt");
        *self.snapshot.write().unwrap_or_else(|p| p.into_inner()) = snap.clone();
        Ok(snap)
    }
}
