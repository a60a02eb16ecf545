import pytest

from clvr.amm import Pool, Side
from clvr.errors import IngestionError
from clvr.replay import bundled_fixture, group_blocks, parse_swaps, read_swaps, replay_empirical
from clvr.reports import to_json

from conftest import all_volatilities

GOOD = "block,direction,amount_in,timestamp\n1,sell,10,100\n1,buy,5,100\n2,buy,3.5,112\n"


def test_parse_good():
    recs = parse_swaps(GOOD)
    assert [r.block_number for r in recs] == [1, 1, 2]
    assert recs[1].side is Side.BUY and recs[2].amount_in == 3.5


@pytest.mark.parametrize(
    "text, line",
    [
        ("", 1),
        ("blk,direction,amount_in,timestamp\n", 1),
        ("block,direction,amount_in,timestamp\n1,sell,10\n", 2),
        ("block,direction,amount_in,timestamp\n1,sell,10,0\n1,hold,1,0\n", 3),
        ("block,direction,amount_in,timestamp\n1,sell,-4,0\n", 2),
        ("block,direction,amount_in,timestamp\n1,sell,abc,0\n", 2),
        ("block,direction,amount_in,timestamp\n2,sell,1,0\n1,sell,1,0\n", 3),
    ],
)
def test_parse_errors_carry_line(text, line):
    with pytest.raises(IngestionError) as err:
        parse_swaps(text)
    assert err.value.line == line
    assert str(err.value).startswith(f"line {line}:")


def test_read_swaps_file(tmp_path):
    path = tmp_path / "swaps.csv"
    path.write_text(GOOD)
    assert len(read_swaps(path)) == 3


def test_grouping():
    recs = parse_swaps(GOOD)
    assert [len(b) for b in group_blocks(recs)] == [2, 1]
    assert [len(b) for b in group_blocks(recs, 2)] == [2, 1]
    with pytest.raises(ValueError):
        group_blocks(recs, 0)


def test_fixture_matches_oracle():
    swaps, oracle = bundled_fixture()
    assert len(swaps) == 30
    rep = replay_empirical(swaps, reserves=oracle["reserves"], grouping=oracle["grouping"])
    assert abs(rep["reduction_pct"]["clvr"] - oracle["optimal_reduction_pct"]) <= 1e-9
    observed = [b["volatility"]["current"] for b in rep["blocks"]]
    assert observed == pytest.approx(oracle["observed_block_volatility"], rel=1e-9)


def test_fixture_first_block_against_naive_enumeration():
    swaps, oracle = bundled_fixture()
    block = group_blocks(swaps)[0][:7]
    pool = Pool(oracle["reserves"], oracle["reserves"])
    table = all_volatilities(pool, block)
    rep = replay_empirical(swaps[:7], reserves=oracle["reserves"])
    assert rep["blocks"][0]["relative_volatility"]["clvr"] >= 0.0
    assert min(table.values()) <= rep["blocks"][0]["volatility"]["clvr"] * (1 + 1e-12)


def test_single_swap_blocks_zero_reduction():
    swaps, _ = bundled_fixture()
    rep = replay_empirical(swaps, grouping=1, relative=False)
    assert rep["reduction_pct"] == {"vhgsr": 0.0, "clvr": 0.0}
    assert rep["total_volatility"]["current"] == rep["total_volatility"]["clvr"]


def test_replay_summary_and_determinism():
    swaps, _ = bundled_fixture()
    rep = replay_empirical(swaps, grouping=5)
    [row] = rep["by_swap_count"]
    assert row["swap_count"] == 5 and row["blocks"] == 6
    assert sum(row["wins"].values()) + row["ties"] == 6
    for v in row["mean_relative_volatility"].values():
        assert 0.0 <= v <= 100.0
    assert to_json(rep) == to_json(replay_empirical(swaps, grouping=5))
    assert set(rep["final_pools"]) == {"current", "vhgsr", "clvr"}
