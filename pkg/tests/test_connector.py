import json
from datetime import date

import pytest

from wageclaim.connector import (
    DeliveryEvent,
    FailMode,
    PayrollConnector,
    ScenarioConfig,
    UnknownAccountError,
)
from wageclaim.models import InvalidParameterError, Platform
from wageclaim.wire import signature_valid

from helpers import make_trip


def collecting_transport(sink, ack=True):
    def transport(endpoint, body, headers):
        sink.append((endpoint, body, headers))
        return ack

    return transport


def make_connector(sink=None, ack=True, **kwargs):
    sink = sink if sink is not None else []
    conn = PayrollConnector(
        secret="test-secret", transport=collecting_transport(sink, ack), **kwargs
    )
    return conn, sink


SCALE_PROFILE = ScenarioConfig(
    seed=42,
    accounts=178,
    platform_mix=78 / 143,
    failure_rate=0.20,
    trips_per_day_min=0,
    trips_per_day_max=2,
    range_start=date(2024, 3, 1),
    range_end=date(2024, 5, 1),
)


def test_seed_is_deterministic():
    a, _ = make_connector()
    b, _ = make_connector()
    first = a.seed(SCALE_PROFILE)
    second = b.seed(SCALE_PROFILE)
    assert [acc.connector_account_id for acc in first] == [
        acc.connector_account_id for acc in second
    ]
    assert [acc.fail_mode for acc in first] == [acc.fail_mode for acc in second]
    assert [acc.trips for acc in first] == [acc.trips for acc in second]


def test_seed_failure_count_is_exact_rounding():
    conn, _ = make_connector()
    accounts = conn.seed(SCALE_PROFILE)
    assert len(accounts) == 178
    failed = [a for a in accounts if a.fail_mode is FailMode.SYNC_FAILURE]
    assert len(failed) == 36  # round(0.20 * 178)


def test_seed_empty_profile():
    conn, _ = make_connector()
    assert conn.seed(ScenarioConfig(accounts=0)) == []


def test_seed_trips_sorted_and_unique():
    conn, _ = make_connector()
    for account in conn.seed(ScenarioConfig(seed=7, accounts=3, trips_per_day_max=3)):
        starts = [t.start_time for t in account.trips]
        assert starts == sorted(starts)
        ids = [t.trip_id for t in account.trips]
        assert len(set(ids)) == len(ids)


def test_scenario_rejects_bad_fractions():
    with pytest.raises(InvalidParameterError):
        ScenarioConfig(failure_rate=1.5)
    with pytest.raises(InvalidParameterError):
        ScenarioConfig(accounts=-1)
    with pytest.raises(InvalidParameterError):
        ScenarioConfig.from_dict({"accounts": 1, "bogus_key": True})


def test_link_batches_by_ceiling_division():
    conn, sink = make_connector()
    conn.seed(ScenarioConfig(seed=1, accounts=1, trips_per_day_min=0, trips_per_day_max=0))
    account = next(iter(conn.accounts.values()))
    account.trips = [
        make_trip(trip_id=f"{account.connector_account_id}:{i}",
                  account_id=account.connector_account_id,
                  platform=account.platform)
        for i in range(1200)
    ]
    result = conn.link_account(account.connector_account_id, "memo://sub")

    events = [d.envelope.event for d in result.deliveries]
    assert events == [
        DeliveryEvent.ACCOUNT_CONNECTED,
        DeliveryEvent.TRIPS_ADDED,
        DeliveryEvent.TRIPS_ADDED,
        DeliveryEvent.TRIPS_ADDED,
    ]
    sizes = [len(d.envelope.payload) for d in result.deliveries[1:]]
    assert sizes == [500, 500, 200]
    finals = [d.envelope.final for d in result.deliveries[1:]]
    assert finals == [False, False, True]
    assert len(sink) == 4


def test_link_failure_account_emits_single_sync_failed():
    conn, _ = make_connector()
    conn.seed(ScenarioConfig(seed=2, accounts=1, failure_rate=1.0))
    account_id = next(iter(conn.accounts))
    result = conn.link_account(account_id, "memo://sub")
    events = [d.envelope.event for d in result.deliveries]
    assert events == [DeliveryEvent.ACCOUNT_CONNECTED, DeliveryEvent.SYNC_FAILED]


def test_link_unknown_account():
    conn, _ = make_connector()
    with pytest.raises(UnknownAccountError):
        conn.link_account("nope", "memo://sub")


def test_deliveries_are_signed():
    conn, sink = make_connector()
    conn.seed(ScenarioConfig(seed=3, accounts=1, trips_per_day_max=1))
    conn.link_account(next(iter(conn.accounts)), "memo://sub")
    for _, body, headers in sink:
        assert signature_valid("test-secret", body, headers["X-Signature"])
        assert headers["X-Delivery-Id"] == json.loads(body)["delivery_id"]


def test_daily_refresh_empty_when_no_new_trips():
    conn, _ = make_connector()
    conn.seed(ScenarioConfig(seed=4, accounts=2, trips_per_day_max=1))
    for account_id in conn.accounts:
        conn.link_account(account_id, "memo://sub")
    assert conn.daily_refresh() == []


def test_daily_refresh_delivers_delta_only():
    conn, sink = make_connector()
    conn.seed(ScenarioConfig(seed=5, accounts=1, trips_per_day_max=1))
    account_id = next(iter(conn.accounts))
    conn.link_account(account_id, "memo://sub")
    sink.clear()

    new = [
        make_trip(trip_id=f"{account_id}:new{i}", account_id=account_id,
                  platform=conn.accounts[account_id].platform)
        for i in range(3)
    ]
    conn.add_trips(account_id, new)
    records = conn.daily_refresh()
    assert len(records) == 1
    assert records[0].envelope.event is DeliveryEvent.TRIPS_ADDED
    assert len(records[0].envelope.payload) == 3
    assert conn.daily_refresh() == []  # delta consumed


def test_unacknowledged_envelope_redelivered_with_same_id():
    conn, sink = make_connector(ack=False)
    conn.seed(ScenarioConfig(seed=6, accounts=1, trips_per_day_max=1))
    account_id = next(iter(conn.accounts))
    result = conn.link_account(account_id, "memo://sub")
    assert not result.all_acknowledged
    original_ids = [d.envelope.delivery_id for d in result.deliveries]

    conn.transport = collecting_transport(sink, ack=True)
    retried = conn.daily_refresh()
    assert [r.envelope.delivery_id for r in retried] == original_ids
    assert all(r.envelope.attempt == 2 for r in retried)
    assert conn.daily_refresh() == []  # acknowledged now, nothing pending


def test_state_round_trip(tmp_path):
    conn, _ = make_connector()
    conn.seed(ScenarioConfig(seed=9, accounts=4, trips_per_day_max=2, failure_rate=0.5))
    path = tmp_path / "state.json"
    conn.save_state(path)

    other, _ = make_connector()
    other.load_state(path)
    path2 = tmp_path / "state2.json"
    other.save_state(path2)
    assert path.read_bytes() == path2.read_bytes()
    assert other.accounts.keys() == conn.accounts.keys()
    for account_id, account in conn.accounts.items():
        assert other.accounts[account_id].trips == account.trips
