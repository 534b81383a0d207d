from __future__ import annotations

import random
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from generators import random_model
from fpd.model import (
    ConnectorKind,
    ConnectorNode,
    DanglingReference,
    DecompositionCycle,
    DuplicateId,
    Flow,
    Identification,
    InvalidElement,
    Path,
    Placement,
    Process,
    ProcessOperator,
    StateKind,
    StateNode,
    TechnicalResource,
    Usage,
    boundary_states,
    build_model,
    decomposition_depth,
    decomposition_of,
    flow_paths,
    operator_io,
    resources_of,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def state(uid, kind=StateKind.PRODUCT, placement=Placement.BOUNDARY, refines=None):
    return StateNode(Identification(uid, uid), kind, placement, (), refines)


def op(uid, decomposition=None):
    return ProcessOperator(Identification(uid, uid), (), decomposition)


def conn(uid, kind=ConnectorKind.FORK):
    return ConnectorNode(Identification(uid, uid), kind)


def res(uid):
    return TechnicalResource(Identification(uid, uid))


def proc(uid, **parts):
    parts = {k: tuple(v) for k, v in parts.items()}
    return Process(Identification(uid, uid), f"{uid}_b", **parts)


def flows(*pairs):
    return [Flow(f"f_{a}_{b}", a, b) for a, b in pairs]


def names(states):
    return [s.name for s in states]


class TestBuildModel:
    def test_collar_has_one_root(self, collar):
        assert len(collar.processes) == 1
        assert collar.root_process_ids == (collar.processes[0].id,)
        p = collar.processes[0]
        assert {"Collar", "Rivet Position"} <= set(names(p.states))
        assert names(p.operators) == ["Automated Collar Screwing"]

    def test_empty_process(self):
        m = build_model([proc("P")])
        assert m.root_process_ids == ("P",)
        p = m.process("P")
        assert p.states == p.operators == p.flows == p.usages == ()

    def test_roots_exclude_decomposition_targets(self):
        m = build_model([proc("P1", operators=[op("OP1", "P2")]), proc("P2")])
        all_ids = {p.id for p in m.processes}
        targets = {o.decomposition for p in m.processes for o in p.operators if o.decomposition}
        assert set(m.root_process_ids) == all_ids - targets == {"P1"}

    def test_dangling_flow(self):
        with pytest.raises(DanglingReference) as exc:
            build_model([proc("P", states=[state("S")], flows=flows(("S", "ghost")))])
        assert exc.value.ident == "ghost"

    def test_flow_cannot_reach_other_process(self):
        with pytest.raises(DanglingReference):
            build_model([proc("P1", states=[state("S")], flows=flows(("S", "O"))),
                         proc("P2", operators=[op("O")])])

    def test_flow_to_resource_rejected(self):
        with pytest.raises(DanglingReference):
            build_model([proc("P", states=[state("S")], resources=[res("R")],
                              flows=flows(("S", "R")))])

    def test_dangling_usage(self):
        with pytest.raises(DanglingReference):
            build_model([proc("P", operators=[op("O")], usages=[Usage("u", "O", "R")])])

    def test_usage_with_wrong_kinds_is_buildable(self):
        # endpoint kinds are the usage-endpoint rule's business
        m = build_model([proc("P", operators=[op("O")], states=[state("S")],
                              usages=[Usage("u", "O", "S")])])
        assert m.process("P").usages[0].resource == "S"

    @pytest.mark.parametrize("dup", ["P", "S", "P_b", "f_S_O"])
    def test_duplicate_ids(self, dup):
        p = proc("P", states=[state("S")], operators=[op("O")], flows=flows(("S", "O")))
        other = proc("Q", resources=[res(dup)])
        with pytest.raises(DuplicateId) as exc:
            build_model([p, other])
        assert exc.value.ident == dup

    def test_duplicate_characteristic_id(self):
        from fpd.model import Characteristic
        c = Characteristic(Identification("S"))
        s = replace(state("S"), characteristics=(c,))
        with pytest.raises(DuplicateId):
            build_model([proc("P", states=[s])])

    def test_decomposition_cycle(self):
        with pytest.raises(DecompositionCycle) as exc:
            build_model([proc("P1", operators=[op("A", "P2")]),
                         proc("P2", operators=[op("B", "P3")]),
                         proc("P3", operators=[op("C", "P2")])])
        assert exc.value.path == ["P2", "P3", "P2"]

    def test_self_decomposition(self):
        with pytest.raises(DecompositionCycle):
            build_model([proc("P1", operators=[op("A", "P1")])])

    def test_dangling_decomposition(self):
        with pytest.raises(DanglingReference):
            build_model([proc("P1", operators=[op("A", "nowhere")])])

    def test_refines_must_point_into_parent(self):
        parent = proc("P1", states=[state("X")], operators=[op("A", "P2")])
        ok = build_model([parent, proc("P2", states=[state("Y", refines="X")])])
        assert ok.process("P2").states[0].refines == "X"
        with pytest.raises(DanglingReference):
            build_model([parent, proc("P2", states=[state("Y", refines="Y")])])
        with pytest.raises(DanglingReference):
            build_model([proc("P1", states=[state("X")]),
                         proc("P2", states=[state("Y", refines="X")])])

    def test_invalid_elements(self):
        with pytest.raises(InvalidElement):
            build_model([])
        with pytest.raises(InvalidElement):
            build_model([proc("P", states=[state("")])])
        with pytest.raises(InvalidElement):
            build_model([proc("P", operators=[op("O")], flows=[Flow("f", "O", "O")])])


class TestBoundaryStates:
    def test_collar(self, collar):
        inputs, outputs = boundary_states(collar.processes[0])
        assert set(names(inputs)) >= {"Collar", "Rivet Position", "Electrical Energy Supply"}
        assert set(names(outputs)) >= {"Screwed Collar", "Thermal Energy"}

    def test_no_states(self):
        assert boundary_states(build_model([proc("P")]).process("P")) == ([], [])

    def test_both_directions_excluded(self):
        m = build_model([proc("P", states=[state("S"), state("T"), state("U")],
                              operators=[op("O"), op("Q")],
                              flows=flows(("S", "O"), ("O", "T"), ("T", "Q"), ("Q", "U")))])
        p = m.process("P")
        # classify by enumerating flow directions per state
        direction = {s.id: ({f.target == s.id for f in p.flows if s.id in (f.source, f.target)})
                     for s in p.states}
        assert direction == {"S": {False}, "T": {True, False}, "U": {True}}
        inputs, outputs = boundary_states(p)
        assert names(inputs) == ["S"] and names(outputs) == ["U"]

    def test_intermediate_never_listed(self):
        m = build_model([proc("P", states=[state("S", placement=Placement.INTERMEDIATE)],
                              operators=[op("O")], flows=flows(("S", "O")))])
        assert boundary_states(m.process("P")) == ([], [])


class TestOperatorIO:
    def test_collar(self, collar):
        p = collar.processes[0]
        inputs, outputs = operator_io(p.operators[0], p)
        assert set(names(inputs)) == {"Collar", "Rivet Position", "Electrical Energy Supply"}
        assert set(names(outputs)) == {"Screwed Collar", "Thermal Energy"}

    def test_no_flows(self):
        m = build_model([proc("P", operators=[op("O")])])
        assert operator_io(m.process("P").operators[0], m.process("P")) == ([], [])

    def test_through_fork(self):
        m = build_model([proc("P", states=[state("S")], operators=[op("A"), op("B")],
                              connectors=[conn("F")],
                              flows=flows(("S", "F"), ("F", "A"), ("F", "B")))])
        p = m.process("P")
        for o in p.operators:
            assert names(operator_io(o, p)[0]) == ["S"]

    def test_traversal_stops_at_operators(self):
        m = build_model([proc("P", states=[state("S"), state("T")],
                              operators=[op("A"), op("B")],
                              flows=flows(("S", "A"), ("A", "T"), ("T", "B")))])
        p = m.process("P")
        assert operator_io(p.operators[1], p) == ([p.states[1]], [])

    def test_join_collects_inputs(self):
        m = build_model([proc("P", states=[state("S"), state("T"), state("U")],
                              operators=[op("A")], connectors=[conn("J", ConnectorKind.JOIN)],
                              flows=flows(("T", "J"), ("S", "J"), ("J", "A"), ("A", "U")))])
        p = m.process("P")
        inputs, outputs = operator_io(p.operators[0], p)
        assert names(inputs) == ["S", "T"]  # declaration order
        assert names(outputs) == ["U"]


class TestResourcesAndDecomposition:
    def test_resources_of(self):
        m = build_model([proc("P", operators=[op("O"), op("Q")], resources=[res("R1"), res("R2")],
                              usages=[Usage("u1", "O", "R2"), Usage("u2", "O", "R1")])])
        p = m.process("P")
        o, q = p.operators
        expected = [r for u in p.usages if u.operator == "O" for r in p.resources
                    if r.id == u.resource]
        assert resources_of(o, p) == expected == [p.resources[1], p.resources[0]]
        assert resources_of(q, p) == []

    def test_resources_of_single(self):
        m = build_model([proc("P", operators=[op("O")], resources=[res("R")],
                              usages=[Usage("u", "O", "R")])])
        p = m.process("P")
        assert resources_of(p.operators[0], p) == [p.resources[0]]

    def test_decomposition_of(self):
        m = build_model([proc("P1", operators=[op("OP1", "P2")]),
                         proc("P2", operators=[op("OP2", "P3")]),
                         proc("P3", operators=[op("OP3")])])
        assert decomposition_of(m.process("P1").operators[0], m) is m.process("P2")
        assert decomposition_of(m.process("P2").operators[0], m) is m.process("P3")
        assert decomposition_of(m.process("P3").operators[0], m) is None

    def test_decomposition_depth(self, collar, decomposed):
        assert decomposition_depth(collar.processes[0], collar) == 1
        root = decomposed.process(decomposed.root_process_ids[0])
        assert decomposition_depth(root, decomposed) == 2
        m = build_model([proc("P1", operators=[op("A", "P2"), op("B", "P3")]),
                         proc("P2", operators=[op("C", "P3")]), proc("P3")])
        assert decomposition_depth(m.process("P1"), m) == 3


class TestFlowPaths:
    def test_direct(self):
        m = build_model([proc("P", states=[state("S")], operators=[op("O")],
                              flows=flows(("S", "O")))])
        assert flow_paths(m.process("P")) == [Path("S", (), "O")]

    def test_fork(self):
        m = build_model([proc("P", states=[state("S")], operators=[op("O1"), op("O2")],
                              connectors=[conn("F")],
                              flows=flows(("S", "F"), ("F", "O1"), ("F", "O2")))])
        assert set(flow_paths(m.process("P"))) == {Path("S", ("F",), "O1"),
                                                   Path("S", ("F",), "O2")}

    def test_two_direct(self):
        m = build_model([proc("P", states=[state("S1"), state("S2")], operators=[op("O")],
                              flows=flows(("O", "S1"), ("O", "S2")))])
        assert flow_paths(m.process("P")) == [Path("O", (), "S1"), Path("O", (), "S2")]

    def test_dead_end_and_orphan_connector(self):
        m = build_model([proc("P", states=[state("S")], operators=[op("O")],
                              connectors=[conn("F"), conn("J", ConnectorKind.JOIN)],
                              flows=flows(("S", "F"), ("J", "O")))])
        assert set(flow_paths(m.process("P"))) == {Path("S", (), "F"), Path("J", (), "O")}

    def test_connector_cycle_terminates(self):
        m = build_model([proc("P", states=[state("S")], connectors=[conn("F"), conn("G")],
                              flows=flows(("S", "F"), ("F", "G"), ("G", "F")))])
        assert flow_paths(m.process("P")) == [Path("S", ("F",), "G")]


class TestProperties:
    @settings(max_examples=60, deadline=None)
    @given(seeds)
    def test_references_resolve(self, seed):
        m = random_model(random.Random(seed))
        all_ids = {p.id for p in m.processes}
        for p in m.processes:
            local = set(p.node_index)
            for f in p.flows:
                assert f.source in local and f.target in local
            for u in p.usages:
                assert u.operator in local and u.resource in local
            for o in p.operators:
                assert o.decomposition is None or o.decomposition in all_ids
            parent_states = {s.id for pp, _ in m.parents.get(p.id, ()) for s in pp.states}
            for s in p.states:
                assert s.refines is None or s.refines in parent_states

    @settings(max_examples=60, deadline=None)
    @given(seeds)
    def test_roots_partition_processes(self, seed):
        m = random_model(random.Random(seed))
        targets = {o.decomposition for p in m.processes for o in p.operators if o.decomposition}
        roots = set(m.root_process_ids)
        assert roots | targets == {p.id for p in m.processes}
        assert not roots & targets
        assert roots

    @settings(max_examples=40, deadline=None)
    @given(seeds)
    def test_queries_deterministic(self, seed):
        m1 = random_model(random.Random(seed))
        m2 = random_model(random.Random(seed))
        assert m1 == m2
        for p1, p2 in zip(m1.processes, m2.processes):
            assert boundary_states(p1) == boundary_states(p2) == boundary_states(p1)
            assert flow_paths(p1) == flow_paths(p2)
            for o1, o2 in zip(p1.operators, p2.operators):
                assert operator_io(o1, p1) == operator_io(o2, p2)

    @settings(max_examples=60, deadline=None)
    @given(seeds)
    def test_connector_transparency(self, seed):
        m = random_model(random.Random(seed))
        for p in m.processes:
            p = replace(p, connectors=(),
                        flows=tuple(f for f in p.flows
                                    if not p.is_connector(f.source)
                                    and not p.is_connector(f.target)))
            for o in p.operators:
                direct_in = [s for s in p.states
                             if any(f.source == s.id and f.target == o.id for f in p.flows)]
                direct_out = [s for s in p.states
                              if any(f.source == o.id and f.target == s.id for f in p.flows)]
                assert operator_io(o, p) == (direct_in, direct_out)
