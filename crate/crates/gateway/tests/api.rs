mod common;

use std::time::Duration;

use common::{eventually, fast_config, read_sse, start};
use meter_core::event::EventKind;
use meter_core::meter::MeterState;
use meter_gateway::{GatewayConfig, Pacing};

#[tokio::test]
async fn fresh_meter_awaits_card() {
    let dir = tempfile::tempdir().unwrap();
    let (gw, client) = start(&fast_config(dir.path())).await;
    let m = client.meter().await.unwrap();
    assert_eq!(m.state, MeterState::AwaitingCard);
    assert!(!m.relay_closed);
    assert_eq!(client.loads().await.unwrap().len(), 3);
    assert!(client.cards().await.unwrap().is_empty());
    gw.shutdown().await.unwrap();
}

#[tokio::test]
async fn topup_then_insert_shows_five_ringgit() {
    let dir = tempfile::tempdir().unwrap();
    let (gw, client) = start(&fast_config(dir.path())).await;
    let card = client.mint_card().await.unwrap();
    assert_eq!(card.credit_sen, 0);
    let card = client.topup(card.uid, 500).await.unwrap();
    assert_eq!(card.credit_rm, "5.00");
    assert_eq!(card.write_count, 1);

    let m = client.insert_card(card.uid).await.unwrap();
    assert_eq!(m.state, MeterState::Active);
    assert_eq!(m.credit_rm, "5.00");
    assert_eq!(m.lcd_line2.trim_end(), "CR: RM005.00");
    assert_eq!(client.meter().await.unwrap().credit_rm, "5.00");

    // the balance now lives in the meter
    let cards = client.cards().await.unwrap();
    assert_eq!(cards[0].credit_sen, 0);
    gw.shutdown().await.unwrap();
}

#[tokio::test]
async fn mint_returns_created() {
    let dir = tempfile::tempdir().unwrap();
    let (gw, _client) = start(&fast_config(dir.path())).await;
    let resp = reqwest::Client::new().post(format!("{}/cards", gw.url())).send().await.unwrap();
    assert_eq!(resp.status(), 201);
    gw.shutdown().await.unwrap();
}

#[tokio::test]
async fn errors_carry_code_and_message() {
    let dir = tempfile::tempdir().unwrap();
    let (gw, client) = start(&fast_config(dir.path())).await;
    let http = reqwest::Client::new();
    let url = gw.url();

    let unknown: meter_core::card::Uid = "0011223344556677".parse().unwrap();
    let e = client.topup(unknown, 100).await.unwrap_err();
    assert_eq!(e.code(), Some("unknown_card"));
    let e = client.insert_card(unknown).await.unwrap_err();
    assert_eq!(e.code(), Some("unknown_card"));

    let card = client.mint_card().await.unwrap();
    let e = client.topup(card.uid, 1_000_001).await.unwrap_err();
    assert_eq!(e.code(), Some("value_out_of_range"));
    // failed write leaves the card as it was
    assert_eq!(client.cards().await.unwrap()[0].write_count, 0);

    let e = client.set_load("kettle", true).await.unwrap_err();
    assert_eq!(e.code(), Some("unknown_load"));

    client.set_load("bulb60", true).await.unwrap();
    let e = client.set_load("bulb15", true).await.unwrap_err();
    assert_eq!(e.code(), Some("over_calibration"));
    assert!(!client.loads().await.unwrap().iter().find(|l| l.name == "bulb15").unwrap().on);

    let resp = http
        .post(format!("{url}/topup"))
        .body("{not json")
        .header("content-type", "application/json")
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), 400);
    let body: serde_json::Value = resp.json().await.unwrap();
    assert_eq!(body["code"], "invalid_request");
    assert!(!body["message"].as_str().unwrap().is_empty());

    let resp = http.get(format!("{url}/events?since=abc")).send().await.unwrap();
    assert_eq!(resp.status(), 400);
    let body: serde_json::Value = resp.json().await.unwrap();
    assert_eq!(body["code"], "invalid_request");

    let resp = http.get(format!("{url}/nope")).send().await.unwrap();
    assert_eq!(resp.status(), 404);

    // an empty card is handed back and the meter keeps waiting
    let m = client.insert_card(card.uid).await.unwrap();
    assert_eq!(m.state, MeterState::AwaitingCard);
    gw.shutdown().await.unwrap();
}

#[tokio::test]
async fn second_insert_while_active_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (gw, client) = start(&fast_config(dir.path())).await;
    let a = client.mint_card().await.unwrap();
    let b = client.mint_card().await.unwrap();
    client.topup(a.uid, 200).await.unwrap();
    client.topup(b.uid, 300).await.unwrap();
    client.insert_card(a.uid).await.unwrap();
    let e = client.insert_card(b.uid).await.unwrap_err();
    assert_eq!(e.code(), Some("wrong_state"));
    let b_after = client.cards().await.unwrap().into_iter().find(|c| c.uid == b.uid).unwrap();
    assert_eq!(b_after.credit_sen, 300);
    gw.shutdown().await.unwrap();
}

#[tokio::test]
async fn mutations_append_events_and_reads_do_not() {
    let dir = tempfile::tempdir().unwrap();
    let (gw, client) = start(&fast_config(dir.path())).await;
    let count = |c: &meter_client::MeterClient| {
        let c = c.clone();
        async move { c.events(None).await.unwrap().len() }
    };

    assert_eq!(count(&client).await, 0);
    client.meter().await.unwrap();
    client.cards().await.unwrap();
    client.loads().await.unwrap();
    client.sms().await.unwrap();
    assert_eq!(count(&client).await, 0);

    let card = client.mint_card().await.unwrap();
    let n1 = count(&client).await;
    assert!(n1 >= 1);
    client.topup(card.uid, 50).await.unwrap();
    let n2 = count(&client).await;
    assert!(n2 > n1);
    client.set_load("bulb25", false).await.unwrap();
    let n3 = count(&client).await;
    assert!(n3 > n2);
    client.insert_card(card.uid).await.unwrap();
    assert!(count(&client).await > n3);

    let events = client.events(None).await.unwrap();
    for (i, e) in events.iter().enumerate() {
        assert_eq!(e.seq, i as u64);
    }
    let tail = client.events(Some(1)).await.unwrap();
    assert_eq!(tail.first().map(|e| e.seq), Some(2));
    gw.shutdown().await.unwrap();
}

#[tokio::test]
async fn afap_runs_to_cutoff_with_one_sms() {
    let dir = tempfile::tempdir().unwrap();
    let (gw, client) = start(&fast_config(dir.path())).await;
    let card = client.mint_card().await.unwrap();
    client.topup(card.uid, 500).await.unwrap();
    client.insert_card(card.uid).await.unwrap();
    client.set_load("bulb60", true).await.unwrap();

    let m = eventually(Duration::from_secs(5), || async {
        let m = client.meter().await.unwrap();
        (m.state == MeterState::CutOff).then_some(m)
    })
    .await;
    assert!(!m.relay_closed);
    assert!(!m.buzzer_active);
    assert_eq!(m.credit_sen, 0);
    assert_eq!(m.elapsed, 33.0);

    let sms = client.sms().await.unwrap();
    assert_eq!(sms.len(), 1);
    assert_eq!(sms[0].msisdn, "+60123456789");

    // time stands still once the relay is open
    tokio::time::sleep(Duration::from_millis(50)).await;
    assert_eq!(client.meter().await.unwrap().elapsed, 33.0);
    gw.shutdown().await.unwrap();
}

#[tokio::test]
async fn wall_clock_pacing_advances_time() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = GatewayConfig {
        data_dir: dir.path().to_path_buf(),
        pacing: Pacing::WallClock { multiplier: 200.0 },
        ..Default::default()
    };
    let (gw, client) = start(&cfg).await;
    // no card, no supply: the meter clock does not run
    tokio::time::sleep(Duration::from_millis(50)).await;
    assert_eq!(client.meter().await.unwrap().elapsed, 0.0);
    assert!(client.events(None).await.unwrap().is_empty());

    let card = client.mint_card().await.unwrap();
    client.topup(card.uid, 500).await.unwrap();
    client.insert_card(card.uid).await.unwrap();
    let m = eventually(Duration::from_secs(5), || async {
        let m = client.meter().await.unwrap();
        (m.elapsed >= 5.0).then_some(m)
    })
    .await;
    // idle base charge only
    assert!(m.credit_sen < 500);
    assert_eq!(m.displayed_power, 0);
    gw.shutdown().await.unwrap();
}

#[tokio::test]
async fn event_stream_replays_and_follows() {
    let dir = tempfile::tempdir().unwrap();
    let (gw, client) = start(&fast_config(dir.path())).await;
    let a = client.mint_card().await.unwrap();
    client.mint_card().await.unwrap();

    let url = gw.url();
    let reader = tokio::spawn(async move { read_sse(&url, None, 3).await });
    tokio::time::sleep(Duration::from_millis(50)).await;
    client.topup(a.uid, 100).await.unwrap();
    let got = reader.await.unwrap();
    let ids: Vec<u64> = got.iter().map(|(id, _)| *id).collect();
    assert_eq!(ids, vec![0, 1, 2]);
    assert!(matches!(got[0].1.kind, EventKind::CardMinted { .. }));
    assert!(matches!(got[2].1.kind, EventKind::Topup { amount_sen: 100, .. }));
    for (id, rec) in &got {
        assert_eq!(*id, rec.seq);
    }

    // resume after seq 1: only seq 2 is replayed
    let resumed = read_sse(&gw.url(), Some(1), 1).await;
    assert_eq!(resumed[0].0, 2);

    let http = reqwest::Client::new();
    let resp =
        http.get(format!("{}/events/stream?since=0", gw.url())).header("Last-Event-ID", "x").send().await.unwrap();
    assert_eq!(resp.status(), 400);
    gw.shutdown().await.unwrap();
}

#[tokio::test]
async fn concurrent_requests_leave_legal_history() {
    let dir = tempfile::tempdir().unwrap();
    let (gw, client) = start(&fast_config(dir.path())).await;
    let card = client.mint_card().await.unwrap();
    client.topup(card.uid, 300).await.unwrap();

    let mut tasks = Vec::new();
    for i in 0..16 {
        let c = client.clone();
        tasks.push(tokio::spawn(async move {
            match i % 4 {
                0 => c.insert_card(card.uid).await.map(|_| ()),
                1 => c.set_load("bulb25", i % 8 == 1).await.map(|_| ()),
                2 => c.mint_card().await.map(|_| ()),
                _ => c.set_load("bulb15", true).await.map(|_| ()),
            }
        }));
    }
    for t in tasks {
        let _ = t.await.unwrap();
    }
    let events = client.events(None).await.unwrap();
    let mut state = MeterState::AwaitingCard;
    for (i, e) in events.iter().enumerate() {
        assert_eq!(e.seq, i as u64);
        if let EventKind::StateChange { from, to } = e.kind {
            assert_eq!(from, state);
            assert!(from.can_transition_to(to), "{from:?} -> {to:?}");
            state = to;
        }
    }
    assert!(events.windows(2).all(|w| w[0].t <= w[1].t));
    gw.shutdown().await.unwrap();
}
