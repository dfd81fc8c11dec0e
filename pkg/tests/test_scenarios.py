"""Unit tests for topology generators and channel allocation policies."""

import math

import pytest

from ecasim.channel import BinaryDisc, LogDistance
from ecasim.scenarios import (
    CHANNEL_POOL,
    DEFAULT_CHANNEL,
    BuildingGeometry,
    allocate_channels,
    gen_hew_building,
    gen_scenario_a,
    gen_scenario_b,
    gen_single_ap,
    load_channel_map,
)


def assert_distinct_positions(topology):
    seen = {(p.x, p.y, p.z) for p in (n.position for n in topology.nodes)}
    assert len(seen) == len(topology.nodes)


class TestSingleAp:
    def test_geometry_is_exact(self):
        topo = gen_single_ap(4, radius_m=5.0)
        ap = topo.aps()[0]
        assert (ap.name, ap.position.x, ap.position.y, ap.position.z) == (
            "ap0", 0.0, 0.0, 1.5,
        )
        stas = topo.stations()
        assert [s.name for s in stas] == ["sta0.0", "sta0.1", "sta0.2", "sta0.3"]
        # Evenly spread on the circle, first station due east.
        assert stas[0].position.x == pytest.approx(5.0)
        assert stas[0].position.y == pytest.approx(0.0)
        assert stas[1].position.x == pytest.approx(0.0)
        assert stas[1].position.y == pytest.approx(5.0)
        for s in stas:
            r = math.hypot(s.position.x, s.position.y)
            assert r == pytest.approx(5.0)
            assert s.position.z == 1.5
            assert s.wlan_id == 0 and s.ap_id == ap.node_id

    def test_ideal_disc_covers_antipodal_stations(self):
        topo = gen_single_ap(10, radius_m=5.0)
        assert isinstance(topo.channel_model, BinaryDisc)
        assert topo.channel_model.tx_range_m == 11.0  # diameter plus margin
        assert topo.channel_model.cs_range_m == 11.0
        assert topo.channel_map == {0: DEFAULT_CHANNEL}

    def test_physical_variant(self):
        topo = gen_single_ap(3, ideal=False)
        assert isinstance(topo.channel_model, LogDistance)

    def test_validation(self):
        with pytest.raises(ValueError):
            gen_single_ap(0)
        with pytest.raises(ValueError):
            gen_single_ap(5, radius_m=0.0)

    def test_channel_of_resolves_through_ap(self):
        topo = gen_single_ap(2)
        for node in topo.nodes:
            assert topo.channel_of(node) == DEFAULT_CHANNEL

    def test_distinct_positions(self):
        assert_distinct_positions(gen_single_ap(30))


class TestScenarioA:
    def test_ap_line_spacing(self):
        topo = gen_scenario_a()
        xs = [ap.position.x for ap in topo.aps()]
        assert xs == [0.0, 15.0, 30.0]
        assert all(ap.position.y == 0.0 for ap in topo.aps())

    def test_first_station_faces_next_ap(self):
        topo = gen_scenario_a(n_aps=2, n_per_ap=4, spacing_m=15.0)
        ring = [s for s in topo.stations() if s.wlan_id == 0]
        assert ring[0].position.x == pytest.approx(5.0)  # radius defaults to spacing/3
        assert ring[0].position.y == pytest.approx(0.0)

    def test_control_model_reaches_own_cell_only(self):
        topo = gen_scenario_a(control=True)
        model = topo.channel_model
        assert isinstance(model, BinaryDisc)
        assert model.tx_range_m == 10.0  # one cell diameter
        physical = gen_scenario_a(control=False)
        assert isinstance(physical.channel_model, LogDistance)

    def test_all_cells_share_the_default_channel(self):
        topo = gen_scenario_a()
        assert set(topo.channel_map.values()) == {DEFAULT_CHANNEL}
        assert sorted(s.wlan_id for s in topo.aps()) == [0, 1, 2]

    def test_counts_and_validation(self):
        topo = gen_scenario_a(n_aps=4, n_per_ap=6)
        assert len(topo.aps()) == 4 and len(topo.stations()) == 24
        with pytest.raises(ValueError):
            gen_scenario_a(n_aps=0)
        with pytest.raises(ValueError):
            gen_scenario_a(spacing_m=-1.0)

    def test_distinct_positions(self):
        assert_distinct_positions(gen_scenario_a(n_aps=5, n_per_ap=8))


class TestScenarioB:
    def test_stations_stay_inside_their_box(self):
        topo = gen_scenario_b(n_aps=3, n_per_ap=15, spacing_m=15.0, half_box_m=5.0, seed=4)
        aps = {ap.wlan_id: ap for ap in topo.aps()}
        for s in topo.stations():
            ap = aps[s.wlan_id]
            assert abs(s.position.x - ap.position.x) <= 5.0
            assert abs(s.position.y - ap.position.y) <= 5.0
            assert s.position.z == 1.5

    def test_seed_reproducibility(self):
        a = gen_scenario_b(n_aps=2, n_per_ap=5, seed=9)
        b = gen_scenario_b(n_aps=2, n_per_ap=5, seed=9)
        c = gen_scenario_b(n_aps=2, n_per_ap=5, seed=10)
        assert [n.position for n in a.nodes] == [n.position for n in b.nodes]
        assert [n.position for n in a.nodes] != [n.position for n in c.nodes]

    def test_counts_names_and_model(self):
        topo = gen_scenario_b()
        assert len(topo.aps()) == 10 and len(topo.stations()) == 200
        assert topo.nodes[0].name == "ap0"
        assert isinstance(topo.channel_model, LogDistance)
        assert set(topo.channel_map.values()) == {DEFAULT_CHANNEL}

    def test_distinct_positions(self):
        for seed in range(5):
            assert_distinct_positions(gen_scenario_b(n_aps=4, n_per_ap=10, seed=seed))


class TestHewBuilding:
    SMALL = BuildingGeometry(floors=2, rooms_x=5, rooms_y=2, room_side_m=10.0,
                             floor_height_m=3.0)

    def test_default_counts(self):
        topo = gen_hew_building(n_per_ap=2)
        assert len(topo.aps()) == 100  # 5 floors x 10x2 rooms
        assert len(topo.stations()) == 200
        assert topo.building == BuildingGeometry()

    def test_room_and_floor_assignment(self):
        topo = gen_hew_building(self.SMALL, n_per_ap=3, seed=2)
        assert len(topo.aps()) == 20
        for node in topo.nodes:
            floor = node.wlan_id // 10
            room = node.wlan_id - floor * 10
            ix, iy = room % 5, room // 5
            assert node.floor_id == floor
            assert node.position.z == floor * 3.0 + 1.5
            assert ix * 10.0 <= node.position.x <= (ix + 1) * 10.0
            assert iy * 10.0 <= node.position.y <= (iy + 1) * 10.0

    def test_names_follow_wlan(self):
        topo = gen_hew_building(self.SMALL, n_per_ap=1, seed=0)
        assert topo.nodes[0].name == "ap0"
        assert topo.nodes[1].name == "sta0.0"
        assert topo.nodes[2].name == "ap1"

    def test_seed_reproducibility_and_distinctness(self):
        a = gen_hew_building(self.SMALL, n_per_ap=4, seed=5)
        b = gen_hew_building(self.SMALL, n_per_ap=4, seed=5)
        assert [n.position for n in a.nodes] == [n.position for n in b.nodes]
        assert_distinct_positions(a)

    def test_validation(self):
        with pytest.raises(ValueError):
            gen_hew_building(n_per_ap=0)
        with pytest.raises(ValueError):
            BuildingGeometry(floors=0)
        with pytest.raises(ValueError):
            BuildingGeometry(room_side_m=-2.0)


class TestChannelPolicies:
    def building_topo(self):
        return gen_hew_building(TestHewBuilding.SMALL, n_per_ap=1, seed=1)

    def test_single(self):
        topo = allocate_channels(self.building_topo(), "single")
        assert set(topo.channel_map.values()) == {DEFAULT_CHANNEL}

    def test_eight_type_ab_pattern(self):
        topo = allocate_channels(self.building_topo(), "eight_type_ab")
        by_key = {(ap.floor_id, ap.wlan_id % 10): topo.channel_of(ap) for ap in topo.aps()}
        assert by_key[(0, 0)] == CHANNEL_POOL[0]
        assert by_key[(0, 7)] == CHANNEL_POOL[7]
        assert by_key[(0, 8)] == CHANNEL_POOL[0]  # pattern repeats every 8 rooms
        assert by_key[(1, 0)] == CHANNEL_POOL[4]  # odd floors shifted by half
        assert set(topo.channel_map.values()) <= set(CHANNEL_POOL[:8])

    def test_eight_type_ab_differs_between_floors(self):
        topo = allocate_channels(self.building_topo(), "eight_type_ab")
        chan = {(ap.floor_id, ap.wlan_id % 10): topo.channel_of(ap) for ap in topo.aps()}
        for room in range(10):
            assert chan[(0, room)] != chan[(1, room)]

    def test_twenty_grid_unique_per_floor(self):
        topo = allocate_channels(gen_hew_building(n_per_ap=1, seed=1), "twenty_grid")
        for floor in range(5):
            floor_channels = [
                topo.channel_of(ap) for ap in topo.aps() if ap.floor_id == floor
            ]
            assert sorted(floor_channels) == sorted(CHANNEL_POOL)

    def test_twenty_grid_staggers_floors(self):
        topo = allocate_channels(gen_hew_building(n_per_ap=1, seed=1), "twenty_grid")
        chan = {(ap.floor_id, ap.wlan_id % 20): topo.channel_of(ap) for ap in topo.aps()}
        for floor in range(4):
            for room in range(20):
                assert chan[(floor, room)] != chan[(floor + 1, room)]

    def test_random_pool_and_reproducibility(self):
        base = self.building_topo()
        topo = allocate_channels(base, "random:4", seed=3)
        assert set(topo.channel_map.values()) <= set(CHANNEL_POOL[:4])
        again = allocate_channels(base, "random:4", seed=3)
        other = allocate_channels(base, "random:4", seed=4)
        assert topo.channel_map == again.channel_map
        assert topo.channel_map != other.channel_map

    def test_random_count_validation(self):
        with pytest.raises(ValueError):
            allocate_channels(self.building_topo(), "random:0")
        with pytest.raises(ValueError):
            allocate_channels(self.building_topo(), "random:21")
        with pytest.raises(ValueError):
            allocate_channels(self.building_topo(), "random:many")

    def test_file_policy(self, tmp_path):
        lines = ["# floor room channel"]
        for floor in range(2):
            for room in range(10):
                lines.append(f"{floor} {room} {CHANNEL_POOL[(room + floor) % 6]}")
        path = tmp_path / "map.txt"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        topo = allocate_channels(self.building_topo(), f"file:{path}")
        for ap in topo.aps():
            expected = CHANNEL_POOL[(ap.wlan_id % 10 + ap.floor_id) % 6]
            assert topo.channel_of(ap) == expected

    def test_file_policy_missing_room(self, tmp_path):
        path = tmp_path / "map.txt"
        path.write_text("0 0 36\n", encoding="utf-8")
        with pytest.raises(ValueError, match="no entry"):
            allocate_channels(self.building_topo(), f"file:{path}")

    def test_policies_need_a_building(self):
        flat = gen_single_ap(3)
        for policy in ("eight_type_ab", "twenty_grid", "file:whatever"):
            with pytest.raises(ValueError):
                allocate_channels(flat, policy)

    def test_unknown_policy(self):
        with pytest.raises(ValueError, match="unknown channel policy"):
            allocate_channels(self.building_topo(), "rainbow")

    def test_allocation_does_not_mutate_input(self):
        base = self.building_topo()
        before = dict(base.channel_map)
        allocate_channels(base, "eight_type_ab")
        assert base.channel_map == before


class TestChannelMapFile:
    def test_parses_comments_and_blanks(self, tmp_path):
        path = tmp_path / "map.txt"
        path.write_text("# header\n\n0 0 36  # corner room\n0 1 40\n", encoding="utf-8")
        assert load_channel_map(path) == {(0, 0): 36, (0, 1): 40}

    def test_reports_line_numbers(self, tmp_path):
        path = tmp_path / "map.txt"
        path.write_text("0 0 36\n0 1\n", encoding="utf-8")
        with pytest.raises(ValueError, match=r"map\.txt:2"):
            load_channel_map(path)

    def test_rejects_non_integer(self, tmp_path):
        path = tmp_path / "map.txt"
        path.write_text("0 zero 36\n", encoding="utf-8")
        with pytest.raises(ValueError, match="non-integer"):
            load_channel_map(path)

    def test_rejects_duplicates(self, tmp_path):
        path = tmp_path / "map.txt"
        path.write_text("0 0 36\n0 0 40\n", encoding="utf-8")
        with pytest.raises(ValueError, match="duplicate"):
            load_channel_map(path)
