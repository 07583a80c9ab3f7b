"""
Explanation search and support graphs

Two searches share the resolution engine: an exhaustive untabled search that
returns every explanation of a goal, and a tabled search that memoizes each
ground table atom with its t-explanations. Support graphs order the tabled
atoms so that every atom is referenced only by atoms before it.
"""
import os
import sys
from dataclasses import dataclass
from itertools import combinations

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))
from config import Config
from core.errors import (NonGroundTableCallError, CycleError, ResourceLimitError,
                         ModelError)
from core.program import Diagnostic, DiagnosticReport
from core.resolution import Resolver, Branch, SwitchInstance, node_sort_key
from core.terms import EMPTY, apply_substitution, is_ground, format_term
from utils.logger import setup_logger

logger = setup_logger(__name__)


class Explanation(frozenset):
    """Set of ground switch instances"""

    def ordered(self):
        return sorted(self, key=SwitchInstance.sort_key)

    def is_consistent(self):
        seen = {}
        for instance in self:
            if seen.setdefault(instance.trial_key, instance.value) != instance.value:
                return False
        return True

    def probability(self, params):
        p = 1.0
        for instance in self:
            p *= params.prob(instance.name, instance.value)
        return p

    def sigma(self, name, value):
        """Number of distinct trials at which switch name takes value"""
        return sum(1 for i in self if i.name == name and i.value == value)

    def __str__(self):
        return "{" + ", ".join(str(i) for i in self.ordered()) + "}"

    def __repr__(self):
        return f"Explanation({self})"


def format_node(node):
    return str(node) if isinstance(node, SwitchInstance) else format_term(node)


class SolutionTable:
    """Ground table atom -> list of t-explanations, in insertion order"""

    def __init__(self):
        self._entries = {}
        self._open = set()

    def open(self, atom):
        self._entries[atom] = None
        self._open.add(atom)

    def close(self, atom, explanations):
        self._entries[atom] = list(explanations)
        self._open.discard(atom)

    def in_progress(self, atom):
        return atom in self._open

    def __contains__(self, atom):
        return atom in self._entries

    def __getitem__(self, atom):
        entry = self._entries[atom]
        return [] if entry is None else entry

    def __len__(self):
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    def items(self):
        for atom in self._entries:
            yield atom, self[atom]

    def explanation_count(self):
        return sum(len(self[atom]) for atom in self._entries)


class TabledResolver(Resolver):
    """Search that stops at ground table calls and memoizes them"""

    def __init__(self, program, max_steps=None):
        super().__init__(program, max_steps)
        self.table = SolutionTable()

    def complete(self, atom):
        """Find every t-explanation of a ground atom, filling the table"""
        if atom in self.table:
            return
        self.table.open(atom)
        seen = set()
        found = []
        start = Branch((), EMPTY)
        for branch in self.run(self.call_user(atom, (), start)):
            key = tuple(sorted(branch.nodes, key=node_sort_key))
            if key not in seen:
                seen.add(key)
                found.append(tuple(branch.nodes))
        self.table.close(atom, found)

    def call_user(self, goal, rest, branch):
        if branch.goals and self.program.is_table(goal.key):
            return self._call_table(goal, rest, branch)
        return super().call_user(goal, rest, branch)

    def _call_table(self, goal, rest, branch):
        atom = apply_substitution(goal, branch.subst)
        if not is_ground(atom):
            raise NonGroundTableCallError(f"Table predicate called with non-ground {format_term(atom)}")
        if atom not in self.table:
            self.complete(atom)
        # an open atom is a cyclic reference; it is recorded and reported by the graph builder
        if self.table.in_progress(atom) or self.table[atom]:
            yield Branch(rest, branch.subst, branch.nodes + (atom,), branch.trials)


def tabled_search(program, goal, max_steps=None):
    """Solution table for a ground goal; the goal itself is always tabled"""
    if not is_ground(goal):
        raise NonGroundTableCallError(f"Goal {format_term(goal)} is not ground")
    resolver = TabledResolver(program, max_steps)
    resolver.complete(goal)
    logger.debug(f"Tabled search for {format_term(goal)}: {len(resolver.table)} atoms, "
                 f"{resolver.table.explanation_count()} t-explanations, {resolver.steps} steps")
    return resolver.table


def enumerate_explanations_exhaustive(program, goal, max_steps=None, cap=None):
    """All explanations of a ground goal by full untabled SLD search"""
    cap = Config.MAX_EXPLANATIONS if cap is None else cap
    resolver = Resolver(program, max_steps)
    found = set()
    for branch in resolver.solve((goal,)):
        found.add(Explanation(n for n in branch.nodes if isinstance(n, SwitchInstance)))
        if len(found) > cap:
            raise ResourceLimitError(f"More than {cap} explanations for {format_term(goal)}")
    return found


@dataclass(frozen=True)
class SupportGraph:
    atoms: tuple  # τ_0 .. τ_K
    explanations: tuple  # per atom, tuple of t-explanations

    @property
    def goal(self):
        return self.atoms[0]

    def index(self):
        return {atom: k for k, atom in enumerate(self.atoms)}

    def items(self):
        return zip(self.atoms, self.explanations)

    def explanation_count(self):
        return sum(len(e) for e in self.explanations)

    def size(self):
        """Table atoms plus all nodes of all t-explanations"""
        return len(self.atoms) + sum(len(t) for texps in self.explanations for t in texps)

    def switch_names(self):
        names = []
        seen = set()
        for texps in self.explanations:
            for texp in texps:
                for node in texp:
                    if isinstance(node, SwitchInstance) and node.name not in seen:
                        seen.add(node.name)
                        names.append(node.name)
        return names


def build_support_graph(table, goal):
    """
    Order the atoms reachable from goal so that references point forward

    Raises:
        CycleError: a table atom depends on itself
    """
    if goal not in table:
        raise ModelError(f"Goal {format_term(goal)} has no solution-table entry")
    order = []
    state = {}  # atom -> 'active' | 'done'
    path = []

    def visit(atom):
        state[atom] = 'active'
        path.append(atom)
        for texp in table[atom]:
            for node in texp:
                if isinstance(node, SwitchInstance):
                    continue
                mark = state.get(node)
                if mark == 'active':
                    witness = path[path.index(node):] + [node]
                    chain = " -> ".join(format_term(a) for a in witness)
                    raise CycleError(f"Acyclic-support condition violated: {chain}", witness)
                if mark is None:
                    if node not in table:
                        raise ModelError(f"Table node {format_term(node)} has no entry")
                    visit(node)
        path.pop()
        state[atom] = 'done'
        order.append(atom)

    visit(goal)
    order.reverse()
    graph = SupportGraph(tuple(order), tuple(tuple(table[a]) for a in order))
    logger.debug(f"Support graph for {format_term(goal)}: {len(order)} atoms, size {graph.size()}")
    return graph


def explain(program, goal, max_steps=None):
    """Tabled search followed by graph construction"""
    return build_support_graph(tabled_search(program, goal, max_steps), goal)


def _merge(left, right):
    """Union of two explanations, or None when they disagree on a trial"""
    merged = dict((i.trial_key, i) for i in left)
    for instance in right:
        known = merged.get(instance.trial_key)
        if known is not None and known.value != instance.value:
            return None
        merged[instance.trial_key] = instance
    return Explanation(merged.values())


def flatten(graph, cap=None):
    """Expand table nodes into full explanations"""
    cap = Config.MAX_EXPLANATIONS if cap is None else cap
    index = graph.index()
    expanded = [None] * len(graph.atoms)
    for k in range(len(graph.atoms) - 1, -1, -1):
        results = set()
        for texp in graph.explanations[k]:
            switches = Explanation(n for n in texp if isinstance(n, SwitchInstance))
            partial = {switches} if switches.is_consistent() else set()
            for node in texp:
                if isinstance(node, SwitchInstance):
                    continue
                partial = {m for p in partial for e in expanded[index[node]]
                           for m in (_merge(p, e),) if m is not None}
                if len(partial) > cap:
                    raise ResourceLimitError(f"Flattening exceeded {cap} explanations")
            results |= partial
        if len(results) > cap:
            raise ResourceLimitError(f"Flattening exceeded {cap} explanations")
        expanded[k] = results
    return expanded[0]


def check_exclusiveness_bruteforce(program, goal, max_steps=None, cap=None):
    """Pairs of explanations not separated by a shared trial with differing values"""
    explanations = sorted(enumerate_explanations_exhaustive(program, goal, max_steps, cap),
                          key=lambda e: [i.sort_key() for i in e.ordered()])
    report = DiagnosticReport()
    for first, second in combinations(explanations, 2):
        values = {i.trial_key: i.value for i in first}
        if not any(i.trial_key in values and values[i.trial_key] != i.value for i in second):
            report.append(Diagnostic(
                'error', 'non-exclusive',
                f"explanations {first} and {second} of {format_term(goal)} can hold together"))
    return report


def check_independence(graph):
    """
    Flag t-explanations whose parts can reach a common trial

    Best effort: the independence condition is semantic and is not decided here.
    """
    reachable = [None] * len(graph.atoms)
    index = graph.index()
    for k in range(len(graph.atoms) - 1, -1, -1):
        keys = set()
        for texp in graph.explanations[k]:
            for node in texp:
                if isinstance(node, SwitchInstance):
                    keys.add(node.trial_key)
                else:
                    keys |= reachable[index[node]]
        reachable[k] = frozenset(keys)

    report = DiagnosticReport()
    for atom, texps in graph.items():
        for texp in texps:
            parts = []
            for node in texp:
                if isinstance(node, SwitchInstance):
                    parts.append((node, frozenset([node.trial_key])))
                else:
                    parts.append((node, reachable[index[node]]))
            for (a, keys_a), (b, keys_b) in combinations(parts, 2):
                if isinstance(a, SwitchInstance) and isinstance(b, SwitchInstance):
                    continue
                if keys_a & keys_b:
                    report.append(Diagnostic(
                        'warning', 'shared-trial',
                        f"in a t-explanation of {format_term(atom)}, {format_node(a)} and "
                        f"{format_node(b)} can use the same trial"))
    return report


def format_support_graph(graph):
    """One section per table atom, one line per t-explanation"""
    lines = []
    for atom, texps in graph.items():
        lines.append(f"{format_term(atom)}:")
        for texp in texps:
            body = " & ".join(format_node(n) for n in texp) if texp else "true"
            lines.append(f"  {body}")
    return "\n".join(lines) + "\n"


def _dot_label(text):
    return text.replace('\\', '\\\\').replace('"', '\\"')


def to_dot(graph):
    """Graphviz text: a cluster per table atom, a node chain per t-explanation"""
    lines = ["digraph support {", "  rankdir=LR;", "  node [shape=circle, fontsize=10];"]
    for k, (atom, texps) in enumerate(graph.items()):
        lines.append(f"  subgraph cluster_{k} {{")
        lines.append(f'    label="{_dot_label(format_term(atom))}";')
        lines.append(f'    start_{k} [shape=point, label=""];')
        lines.append(f'    end_{k} [shape=point, label=""];')
        for j, texp in enumerate(texps):
            previous = f"start_{k}"
            for m, node in enumerate(texp):
                name = f"n_{k}_{j}_{m}"
                shape = "circle" if isinstance(node, SwitchInstance) else "doublecircle"
                lines.append(f'    {name} [shape={shape}, label="{_dot_label(format_node(node))}"];')
                lines.append(f"    {previous} -> {name};")
                previous = name
            lines.append(f"    {previous} -> end_{k};")
        lines.append("  }")
    lines.append("}")
    return "\n".join(lines) + "\n"
