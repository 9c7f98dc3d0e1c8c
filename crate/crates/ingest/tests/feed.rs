use std::sync::Arc;

use chrono::{DateTime, Duration, SecondsFormat, Utc};
use earmark_core::SeekSchema;
use earmark_ingest::*;
use earmark_registry::{Location, Registry};
use serde_json::{json, Value};

fn now() -> DateTime<Utc> {
    "2024-03-10T12:00:00Z".parse().unwrap()
}

fn event(id: &str, kind: &str, time: DateTime<Utc>) -> Value {
    IngestEvent {
        id: id.into(),
        event_type: kind.into(),
        time,
        location: Some(Location {
            latitude: -1.5,
            longitude: 35.1,
        }),
        reported_by: "ranger-4".into(),
        group_size: Some(7),
        composition: "2 adult females, 1 calf".into(),
    }
    .to_wire()
}

fn sighting(id: &str, hours_ago: i64) -> Value {
    event(id, ELEPHANT_SIGHTING, now() - Duration::hours(hours_ago))
}

fn client(feed: &RunningFeed) -> FeedClient {
    client_with(feed, |_| {})
}

fn client_with(feed: &RunningFeed, tweak: impl FnOnce(&mut FeedConfig)) -> FeedClient {
    let mut cfg = FeedConfig {
        base_url: feed.base_url(),
        initial_backoff_ms: 1,
        max_backoff_ms: 4,
        ..FeedConfig::default()
    };
    tweak(&mut cfg);
    FeedClient::new(cfg).unwrap().with_clock(Arc::new(now))
}

fn ids(events: &[IngestEvent]) -> Vec<&str> {
    events.iter().map(|e| e.id.as_str()).collect()
}

#[tokio::test]
async fn empty_feed_gives_empty_list() {
    let feed = mock_server(vec![]).await.unwrap();
    let out = client(&feed).fetch(None).await.unwrap();
    assert!(out.events.is_empty());
    assert_eq!(out.pages, 1);

    let page: EventPage = reqwest::get(format!("{}{EVENTS_PATH}", feed.base_url()))
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(page.count, 0);
    assert!(page.results.is_empty());
    assert_eq!(page.next, None);
}

#[tokio::test]
async fn only_elephant_sightings_are_returned() {
    let feed = mock_server(vec![
        sighting("evt-1", 3),
        event("evt-2", "poaching", now() - Duration::hours(2)),
        sighting("evt-3", 1),
    ])
    .await
    .unwrap();
    let events = client(&feed).fetch_active_events(None).await.unwrap();
    assert_eq!(ids(&events), ["evt-1", "evt-3"]);
    assert_eq!(events[0].group_size, Some(7));
    assert_eq!(events[0].composition, "2 adult females, 1 calf");
}

#[tokio::test]
async fn duplicate_ids_collapse_to_first() {
    let mut later = sighting("evt-1", 1);
    later["reported_by"] = json!("someone else");
    let feed = mock_server(vec![sighting("evt-1", 2), later, sighting("evt-2", 1)]).await.unwrap();
    let events = client(&feed).fetch_active_events(None).await.unwrap();
    assert_eq!(ids(&events), ["evt-1", "evt-2"]);
    assert_eq!(events[0].reported_by, "ranger-4");
}

#[tokio::test]
async fn pagination_walks_every_page() {
    let fixtures: Vec<Value> = (0..250).map(|i| sighting(&format!("evt-{i:03}"), 300 - i)).collect();
    let feed = mock_server(fixtures).await.unwrap();

    let url = format!("{}{EVENTS_PATH}", feed.base_url());
    let http = reqwest::Client::new();
    let mut sizes = Vec::new();
    let mut page = 1;
    loop {
        let body: EventPage = http
            .get(&url)
            .query(&[("page", page.to_string()), ("page_size", "100".into())])
            .send()
            .await
            .unwrap()
            .json()
            .await
            .unwrap();
        assert_eq!(body.count, 250);
        sizes.push(body.results.len());
        match body.next {
            Some(next) => assert_eq!(next, format!("{EVENTS_PATH}?page={}&page_size=100", page + 1)),
            None => break,
        }
        page += 1;
    }
    assert_eq!(sizes, [100, 100, 50]);

    let out = client(&feed).fetch(None).await.unwrap();
    assert_eq!(out.pages, 3);
    assert_eq!(out.events.len(), 250);
    assert_eq!(out.events[249].id, "evt-249");
}

#[tokio::test]
async fn malformed_records_are_served_verbatim_and_skipped() {
    let broken = json!({ "id": "evt-bad", "event_type": ELEPHANT_SIGHTING, "time": "last tuesday" });
    let feed = mock_server(vec![sighting("evt-1", 2), broken.clone(), json!(17), sighting("evt-2", 1)])
        .await
        .unwrap();

    let page: EventPage = reqwest::get(format!("{}{EVENTS_PATH}", feed.base_url()))
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(page.results[1], broken);
    assert_eq!(page.results[2], json!(17));

    let out = client(&feed).fetch(None).await.unwrap();
    assert_eq!(ids(&out.events), ["evt-1", "evt-2"]);
    assert_eq!(out.skipped.len(), 2);
    assert_eq!(out.skipped[0].id.as_deref(), Some("evt-bad"));
    assert_eq!(out.skipped[1].id, None);
}

#[tokio::test]
async fn since_keeps_only_newer_events() {
    let feed = mock_server(vec![sighting("old", 5), sighting("edge", 3), sighting("new", 1)])
        .await
        .unwrap();
    let since = now() - Duration::hours(3);
    let events = client(&feed).fetch_active_events(Some(since)).await.unwrap();
    assert_eq!(ids(&events), ["new"]);

    // The server filters too; the query parameter reaches it intact.
    let page: EventPage = reqwest::Client::new()
        .get(format!("{}{EVENTS_PATH}", feed.base_url()))
        .query(&[("since", since.to_rfc3339_opts(SecondsFormat::Secs, true))])
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap();
    assert_eq!(page.count, 1);
}

#[tokio::test]
async fn small_clock_skew_is_tolerated() {
    let feed = mock_server(vec![
        event("soon", ELEPHANT_SIGHTING, now() + Duration::minutes(4)),
        event("at-limit", ELEPHANT_SIGHTING, now() + Duration::minutes(5)),
        event("far", ELEPHANT_SIGHTING, now() + Duration::minutes(10)),
    ])
    .await
    .unwrap();
    let out = client(&feed).fetch(None).await.unwrap();
    assert_eq!(ids(&out.events), ["soon", "at-limit"]);
    assert_eq!(out.future, ["soon", "at-limit"]);
    assert_eq!(out.skipped.len(), 1);
    assert_eq!(out.skipped[0].id.as_deref(), Some("far"));
}

#[tokio::test]
async fn token_is_sent_and_checked() {
    let feed = RunningFeed::start(MockFeed::new(vec![sighting("evt-1", 1)]).with_token("s3cret"))
        .await
        .unwrap();
    let ok = client_with(&feed, |c| c.token = Some("s3cret".into()));
    assert_eq!(ok.fetch_active_events(None).await.unwrap().len(), 1);

    let before = feed.feed.requests();
    let wrong = client_with(&feed, |c| c.token = Some("nope".into()));
    match wrong.fetch(None).await {
        Err(FeedError::Rejected { status, .. }) => assert_eq!(status, 401),
        other => panic!("expected rejection, got {other:?}"),
    }
    assert_eq!(feed.feed.requests(), before + 1, "auth failures are not retried");
}

#[tokio::test]
async fn transient_failures_are_retried() {
    let feed = mock_server(vec![sighting("evt-1", 1)]).await.unwrap();
    feed.feed.fail_next(2);
    let events = client(&feed).fetch_active_events(None).await.unwrap();
    assert_eq!(ids(&events), ["evt-1"]);
    assert_eq!(feed.feed.requests(), 3);
}

#[tokio::test]
async fn persistent_failure_is_unreachable() {
    let feed = mock_server(vec![sighting("evt-1", 1)]).await.unwrap();
    feed.feed.fail_next(100);
    let c = client_with(&feed, |c| c.max_retries = 3);
    match c.fetch(None).await {
        Err(FeedError::Unreachable { attempts, .. }) => assert_eq!(attempts, 4),
        other => panic!("expected unreachable, got {other:?}"),
    }
    assert_eq!(feed.feed.requests(), 4);

    let addr = feed.addr;
    feed.stop().await;
    let gone = FeedClient::new(FeedConfig {
        base_url: format!("http://{addr}"),
        max_retries: 1,
        initial_backoff_ms: 1,
        max_backoff_ms: 1,
        ..FeedConfig::default()
    })
    .unwrap();
    assert!(matches!(gone.fetch(None).await, Err(FeedError::Unreachable { attempts: 2, .. })));
}

#[tokio::test]
async fn ingesting_twice_creates_nothing_new() {
    let mut no_coords = sighting("evt-3", 1);
    no_coords["location"] = Value::Null;
    let feed = mock_server(vec![sighting("evt-1", 3), sighting("evt-2", 2), no_coords]).await.unwrap();
    let c = client(&feed);
    let mut reg = Registry::in_memory(SeekSchema::default_v1());

    let first = ingest_events(&mut reg, "poller", &c.fetch_active_events(None).await.unwrap()).unwrap();
    assert_eq!(first.created.len(), 2);
    assert_eq!(first.rejected.len(), 1);
    assert_eq!(first.rejected[0].0, "evt-3");
    let version = reg.version();

    let second = ingest_events(&mut reg, "poller", &c.fetch_active_events(None).await.unwrap()).unwrap();
    assert!(second.created.is_empty());
    assert_eq!(second.already_linked, ["evt-1", "evt-2"]);
    assert_eq!(reg.version(), version);
    assert_eq!(reg.state().groups.len(), 2);

    let group = &reg.state().groups[&first.created[0].1];
    assert_eq!(group.event_ref, "evt-1");
    assert_eq!(group.timestamp, now() - Duration::hours(3));
    assert!(group.notes.contains("group size 7"));
}

#[test]
fn config_reads_file_then_environment() {
    let cfg = FeedConfig::from_toml(
        r#"
        base_url = "https://feed.example.org"
        token = "from-file"
        page_size = 50
        "#,
    )
    .unwrap();
    assert_eq!(cfg.page_size, 50);
    assert_eq!(cfg.max_retries, FeedConfig::default().max_retries);
    assert_eq!(cfg.events_url(), "https://feed.example.org/api/v1/events");

    let mut env = cfg.clone();
    env.apply_env(|k| match k {
        ENV_FEED_URL => Some("http://10.0.0.2:9000/".into()),
        ENV_FEED_TOKEN => Some("from-env".into()),
        _ => None,
    });
    assert_eq!(env.events_url(), "http://10.0.0.2:9000/api/v1/events");
    assert_eq!(env.token.as_deref(), Some("from-env"));

    assert!(FeedConfig::from_toml("page_size = 0").is_err());
    assert!(FeedConfig::from_toml("base_url = \"ftp://x\"").is_err());
    assert!(FeedConfig::from_toml("colour = 1").is_err());

    let dir = std::env::temp_dir().join(format!("earmark-feed-{}.toml", std::process::id()));
    std::fs::write(&dir, "page_size = 20\n").unwrap();
    let loaded = FeedConfig::load(Some(&dir)).unwrap();
    std::fs::remove_file(&dir).unwrap();
    assert!(loaded.page_size == 20);
}
