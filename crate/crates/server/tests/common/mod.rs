#![allow(dead_code)]

use std::io::Cursor;
use std::net::SocketAddr;

use earmark_ingest::FeedConfig;
use earmark_server::{AppState, Role, RunningServer, ServerConfig, UserConfig};
use image::{DynamicImage, ImageBuffer, ImageFormat, Rgb};
use reqwest::{Method, StatusCode};
use serde_json::Value;
use tempfile::TempDir;

pub const ADMIN: &str = "admin-token-0001";
pub const REVIEWER: &str = "reviewer-token-0001";
pub const CODER: &str = "coder-token-0001";
pub const ANNOTATOR: &str = "annotator-token-0001";

pub struct Harness {
    pub server: RunningServer,
    pub http: reqwest::Client,
    pub dir: TempDir,
}

pub fn users() -> Vec<UserConfig> {
    [
        ("ada", Role::Admin, ADMIN),
        ("rui", Role::Reviewer, REVIEWER),
        ("cam", Role::Coder, CODER),
        ("ann", Role::Annotator, ANNOTATOR),
    ]
    .into_iter()
    .map(|(id, role, token)| UserConfig {
        id: id.into(),
        role,
        token: token.into(),
    })
    .collect()
}

impl Harness {
    pub async fn start(feed: Option<FeedConfig>) -> Harness {
        Harness::start_with(feed, |_| {}).await
    }

    pub async fn start_with(feed: Option<FeedConfig>, tweak: impl FnOnce(&mut ServerConfig)) -> Harness {
        let dir = tempfile::tempdir().unwrap();
        let mut config = ServerConfig {
            bind: SocketAddr::from(([127, 0, 0, 1], 0)),
            registry_path: Some(dir.path().join("registry.sqlite")),
            photo_dir: dir.path().join("photos"),
            feed,
            users: users(),
            ..ServerConfig::default()
        };
        tweak(&mut config);
        let bind = config.bind;
        let state = AppState::open(config).unwrap();
        let server = RunningServer::start(state, bind).await.unwrap();
        Harness {
            server,
            http: reqwest::Client::new(),
            dir,
        }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}/api/v1{path}", self.server.base_url())
    }

    pub async fn call(&self, method: Method, path: &str, token: &str, body: Option<Value>) -> (StatusCode, Value) {
        let mut req = self.http.request(method, self.url(path)).bearer_auth(token);
        if let Some(b) = body {
            req = req.json(&b);
        }
        let resp = req.send().await.unwrap();
        let status = resp.status();
        let text = resp.text().await.unwrap();
        let value = serde_json::from_str(&text).unwrap_or(Value::String(text));
        (status, value)
    }

    pub async fn get(&self, path: &str, token: &str) -> (StatusCode, Value) {
        self.call(Method::GET, path, token, None).await
    }

    pub async fn post(&self, path: &str, token: &str, body: Value) -> (StatusCode, Value) {
        self.call(Method::POST, path, token, Some(body)).await
    }

    pub async fn put(&self, path: &str, token: &str, body: Value) -> (StatusCode, Value) {
        self.call(Method::PUT, path, token, Some(body)).await
    }

    /// `data` of a successful call; panics with the body otherwise.
    pub async fn ok(&self, method: Method, path: &str, token: &str, body: Option<Value>) -> Value {
        let (status, v) = self.call(method.clone(), path, token, body).await;
        assert!(status.is_success(), "{method} {path}: {status} {v}");
        assert!(v["registry_version"].is_u64(), "{path}: no registry_version in {v}");
        v["data"].clone()
    }

    pub async fn upload(&self, group: &str, token: &str, name: &str, bytes: Vec<u8>) -> (StatusCode, Value) {
        let part = reqwest::multipart::Part::bytes(bytes).file_name(name.to_string());
        let form = reqwest::multipart::Form::new().part("file", part);
        let resp = self
            .http
            .post(self.url(&format!("/group-sightings/{group}/photos")))
            .bearer_auth(token)
            .multipart(form)
            .send()
            .await
            .unwrap();
        let status = resp.status();
        (status, resp.json().await.unwrap())
    }

    pub async fn bytes(&self, path: &str, token: &str) -> (StatusCode, Vec<u8>) {
        let resp = self.http.get(self.url(path)).bearer_auth(token).send().await.unwrap();
        (resp.status(), resp.bytes().await.unwrap().to_vec())
    }
}

pub fn png(w: u32, h: u32, tint: u8) -> Vec<u8> {
    let img = ImageBuffer::from_fn(w, h, |x, y| Rgb([(x % 251) as u8, (y % 241) as u8, tint]));
    let mut buf = Cursor::new(Vec::new());
    DynamicImage::ImageRgb8(img).write_to(&mut buf, ImageFormat::Png).unwrap();
    buf.into_inner()
}

/// An open ear-margin-like curve with `bumps` notches.
pub fn contour_points(bumps: usize, phase: f64) -> Vec<[f64; 2]> {
    (0..120)
        .map(|i| {
            let t = i as f64 / 119.0 * std::f64::consts::PI * 1.5;
            let r = 200.0 + 12.0 * (bumps as f64 * t + phase).sin();
            [400.0 + r * t.cos(), 300.0 + r * t.sin()]
        })
        .collect()
}
