mod common;

use std::time::Duration;

use common::{eventually, fast_config, start};
use meter_core::meter::MeterState;
use meter_gateway::session::{CARDS_FILE, EVENTS_FILE, SMS_FILE};

#[tokio::test]
async fn restart_reloads_cards_sms_and_events() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fast_config(dir.path());

    let (gw, client) = start(&cfg).await;
    let spent = client.mint_card().await.unwrap();
    let spare = client.mint_card().await.unwrap();
    client.topup(spent.uid, 500).await.unwrap();
    client.topup(spare.uid, 1234).await.unwrap();
    client.insert_card(spent.uid).await.unwrap();
    client.set_load("bulb60", true).await.unwrap();
    eventually(Duration::from_secs(5), || async {
        (client.meter().await.unwrap().state == MeterState::CutOff).then_some(())
    })
    .await;
    let cards = client.cards().await.unwrap();
    let sms = client.sms().await.unwrap();
    let events = client.events(None).await.unwrap();
    assert_eq!(sms.len(), 1);
    gw.shutdown().await.unwrap();

    let read = |name: &str| std::fs::read(dir.path().join(name)).unwrap();
    let (cards_bytes, sms_bytes, events_bytes) = (read(CARDS_FILE), read(SMS_FILE), read(EVENTS_FILE));

    let (gw, client) = start(&cfg).await;
    assert_eq!(client.cards().await.unwrap(), cards);
    assert_eq!(client.sms().await.unwrap(), sms);
    assert_eq!(client.events(None).await.unwrap(), events);
    assert_eq!(read(CARDS_FILE), cards_bytes);
    assert_eq!(read(SMS_FILE), sms_bytes);
    assert_eq!(read(EVENTS_FILE), events_bytes);

    // numbering and time continue after the restart
    let third = client.mint_card().await.unwrap();
    let after = client.events(Some(events.last().unwrap().seq)).await.unwrap();
    assert_eq!(after.len(), 1);
    assert_eq!(after[0].seq, events.last().unwrap().seq + 1);
    assert!(after[0].t >= events.last().unwrap().t);

    // the spare card still works, and new SMS numbers follow the old ones
    // load switches are not persisted: everything starts off
    assert!(client.loads().await.unwrap().iter().all(|l| !l.on));
    client.insert_card(spare.uid).await.unwrap();
    client.set_load("bulb25", true).await.unwrap();
    eventually(Duration::from_secs(5), || async {
        (client.meter().await.unwrap().state == MeterState::CutOff).then_some(())
    })
    .await;
    let sms2 = client.sms().await.unwrap();
    assert_eq!(sms2.len(), 2);
    assert_eq!(sms2[0], sms[0]);
    assert!(sms2[1].sequence > sms2[0].sequence);
    assert!(client.cards().await.unwrap().iter().any(|c| c.uid == third.uid));
    gw.shutdown().await.unwrap();
}

#[tokio::test]
async fn corrupt_card_store_fails_startup() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join(CARDS_FILE), "{\"uid\":\"zz\"}\n").unwrap();
    let cfg = fast_config(dir.path());
    let err = meter_gateway::Gateway::start(&cfg, "127.0.0.1:0".parse().unwrap()).await.err().unwrap();
    assert!(format!("{err:#}").contains("line 1"), "{err:#}");
}
