import json
from datetime import datetime, timezone

import pytest

from wageclaim.connector import DeliveryEvent, WebhookEnvelope
from wageclaim.ingest import (
    IngestStatus,
    SyncState,
    UnknownAccountError,
    finalize_account,
    handle_webhook,
    sync_status,
)
from wageclaim.store import Store
from wageclaim.wire import sign_body

from helpers import make_trip

SECRET = "ingest-secret"
NOW = datetime(2024, 6, 10, 12, 0, tzinfo=timezone.utc)


@pytest.fixture
def store():
    s = Store(":memory:")
    s.insert_driver("drv1", "d1@example.test", "Driver One", None)
    s.insert_account("acct1", "drv1", "UBER")
    yield s
    s.close()


def envelope(event=DeliveryEvent.TRIPS_ADDED, delivery_id="dlv-1", trips=(),
             final=False, attempt=1, account_id="acct1", error=None):
    return WebhookEnvelope(
        delivery_id=delivery_id,
        event=event,
        connector_account_id=account_id,
        payload=tuple(trips),
        emitted_at=NOW,
        attempt=attempt,
        final=final,
        error=error,
    )


def deliver(store, env):
    body = env.body()
    return handle_webhook(store, SECRET, body, sign_body(SECRET, body))


def three_trips():
    return [
        make_trip(trip_id=f"acct1:{i}", account_id="acct1") for i in range(3)
    ]


def test_happy_path_inserts_trips(store):
    result = deliver(store, envelope(trips=three_trips()))
    assert result.status is IngestStatus.INSERTED
    assert result.trips_inserted == 3
    assert sync_status(store, "acct1").state is SyncState.SYNCING
    assert sync_status(store, "acct1").trips_ingested == 3


def test_final_batch_marks_synced(store):
    deliver(store, envelope(delivery_id="a", trips=three_trips()))
    result = deliver(store, envelope(delivery_id="b", final=True))
    assert result.status is IngestStatus.INSERTED
    assert sync_status(store, "acct1").state is SyncState.SYNCED


def test_duplicate_delivery_acknowledged_without_rewrite(store):
    env = envelope(trips=three_trips())
    first = deliver(store, env)
    second = deliver(store, env)
    assert first.status is IngestStatus.INSERTED
    assert second.status is IngestStatus.DUPLICATE
    assert sync_status(store, "acct1").trips_ingested == 3


def test_retry_with_same_delivery_id_is_duplicate(store):
    env = envelope(trips=three_trips())
    deliver(store, env)
    env.attempt = 2
    assert deliver(store, env).status is IngestStatus.DUPLICATE


def test_tampered_body_rejected_and_nothing_persisted(store):
    env = envelope(trips=three_trips())
    stale_signature = sign_body(SECRET, env.body())
    tampered = env.body().replace(b'"driver_pay_cents":1500', b'"driver_pay_cents":9500')
    result = handle_webhook(store, SECRET, tampered, stale_signature)
    assert result.status is IngestStatus.REJECTED_SIGNATURE
    assert sync_status(store, "acct1").trips_ingested == 0
    assert store.list_dead_letters() == []


def test_missing_signature_rejected(store):
    result = handle_webhook(store, SECRET, envelope().body(), "")
    assert result.status is IngestStatus.REJECTED_SIGNATURE


def test_malformed_body_dead_lettered(store):
    raw = b'{"not json'
    result = handle_webhook(store, SECRET, raw, sign_body(SECRET, raw))
    assert result.status is IngestStatus.REJECTED_MALFORMED
    letters = store.list_dead_letters()
    assert len(letters) == 1
    assert letters[0]["raw_body"] == raw


def test_invalid_trip_quarantines_whole_batch(store):
    good = make_trip(trip_id="acct1:ok", account_id="acct1")
    env = envelope(trips=[good])
    body = json.loads(env.body())
    body["payload"].append(dict(body["payload"][0], trip_id="acct1:bad",
                                driver_pay_cents=-5))
    raw = json.dumps(body, sort_keys=True, separators=(",", ":")).encode()
    result = handle_webhook(store, SECRET, raw, sign_body(SECRET, raw))
    assert result.status is IngestStatus.REJECTED_MALFORMED
    assert sync_status(store, "acct1").trips_ingested == 0  # no partial insert
    assert len(store.list_dead_letters()) == 1


def test_trip_for_other_account_quarantines_batch(store):
    stray = make_trip(trip_id="x", account_id="acct-other")
    result = deliver(store, envelope(trips=[stray]))
    assert result.status is IngestStatus.REJECTED_MALFORMED
    assert sync_status(store, "acct1").trips_ingested == 0


def test_unknown_account_dead_lettered(store):
    result = deliver(store, envelope(account_id="ghost"))
    assert result.status is IngestStatus.REJECTED_MALFORMED
    assert len(store.list_dead_letters()) == 1


def test_sync_failed_records_error(store):
    deliver(store, envelope(event=DeliveryEvent.ACCOUNT_CONNECTED, delivery_id="c"))
    result = deliver(
        store,
        envelope(event=DeliveryEvent.SYNC_FAILED, delivery_id="f",
                 error="provider-side sync error"),
    )
    assert result.status is IngestStatus.INSERTED
    status = sync_status(store, "acct1")
    assert status.state is SyncState.FAILED
    assert status.last_error == "provider-side sync error"


def test_failed_account_can_resume_on_retry(store):
    deliver(store, envelope(event=DeliveryEvent.SYNC_FAILED, delivery_id="f"))
    deliver(store, envelope(event=DeliveryEvent.ACCOUNT_CONNECTED, delivery_id="c2"))
    assert sync_status(store, "acct1").state is SyncState.SYNCING


def test_trip_id_dedup_across_deliveries(store):
    trips = three_trips()
    deliver(store, envelope(delivery_id="a", trips=trips))
    overlapping = trips[1:] + [make_trip(trip_id="acct1:9", account_id="acct1")]
    result = deliver(store, envelope(delivery_id="b", trips=overlapping))
    assert result.trips_inserted == 1  # only the genuinely new trip
    assert sync_status(store, "acct1").trips_ingested == 4


def test_finalize_states(store):
    assert finalize_account(store, "acct1").state is SyncState.PENDING
    deliver(store, envelope(delivery_id="a", trips=three_trips()))
    assert finalize_account(store, "acct1").state is SyncState.SYNCING
    deliver(store, envelope(delivery_id="b", final=True))
    assert finalize_account(store, "acct1").state is SyncState.SYNCED


def test_finalize_failed_account_stays_failed(store):
    deliver(store, envelope(event=DeliveryEvent.SYNC_FAILED, delivery_id="f"))
    assert finalize_account(store, "acct1").state is SyncState.FAILED


def test_finalize_unknown_account(store):
    with pytest.raises(UnknownAccountError):
        finalize_account(store, "ghost")


def test_concurrent_handling_across_accounts(store):
    """Handlers are safe to invoke from multiple threads at once."""
    import threading

    accounts = [f"par-{i}" for i in range(8)]
    for account_id in accounts:
        store.insert_account(account_id, "drv1", "UBER")

    def pump(account_id):
        for batch in range(5):
            trips = [
                make_trip(trip_id=f"{account_id}:{batch}:{j}", account_id=account_id)
                for j in range(10)
            ]
            env = envelope(delivery_id=f"{account_id}-d{batch}", trips=trips,
                           account_id=account_id, final=batch == 4)
            assert deliver(store, env).status is IngestStatus.INSERTED

    threads = [threading.Thread(target=pump, args=(a,)) for a in accounts]
    for t in threads:
        t.start()
    for t in threads:
        t.join()

    for account_id in accounts:
        status = sync_status(store, account_id)
        assert status.state is SyncState.SYNCED
        assert status.trips_ingested == 50


def test_duplication_preserving_order_is_idempotent(store):
    """Delivering every envelope twice must leave the store identical."""
    envelopes = [
        envelope(event=DeliveryEvent.ACCOUNT_CONNECTED, delivery_id="e1"),
        envelope(delivery_id="e2", trips=three_trips()),
        envelope(delivery_id="e3", final=True),
    ]
    single = Store(":memory:")
    single.insert_driver("drv1", "d1@example.test", "Driver One", None)
    single.insert_account("acct1", "drv1", "UBER")
    for env in envelopes:
        deliver(single, env)

    for env in envelopes:
        deliver(store, env)
        deliver(store, env)

    assert store.content_hash() == single.content_hash()
    assert sync_status(store, "acct1") == sync_status(single, "acct1")
    single.close()
