import logging
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import networkx as nx

from config import DEFAULT_ANHARMONICITY_MHZ, F01_MAX_MHZ, F01_MIN_MHZ
from services.errors import ParameterError, ValidationError

logger = logging.getLogger(__name__)

Edge = Tuple[int, int]


@dataclass(frozen=True)
class QubitRecord:
    """Physical record of one transmon: junction resistance (Ohm) and frequencies (MHz)"""

    id: int
    r_n: float
    f01: Optional[float] = None
    anharmonicity: float = DEFAULT_ANHARMONICITY_MHZ
    tuned: bool = False

    def validate(self, f01_window: Tuple[float, float] = (F01_MIN_MHZ, F01_MAX_MHZ)):
        if not self.r_n > 0:
            raise ValidationError(f"Qubit {self.id}: r_n must be positive, got {self.r_n}", f"qubit {self.id}")
        if not self.anharmonicity < 0:
            raise ValidationError(
                f"Qubit {self.id}: anharmonicity must be negative, got {self.anharmonicity}", f"qubit {self.id}"
            )
        if self.f01 is not None and not (f01_window[0] < self.f01 < f01_window[1]):
            raise ValidationError(
                f"Qubit {self.id}: f01 {self.f01} MHz outside sanity window {f01_window}", f"qubit {self.id}"
            )


@dataclass(frozen=True)
class ChipState:
    """Lattice topology plus per-qubit records. Edges are directed (control, target)."""

    name: str
    qubits: Tuple[QubitRecord, ...]
    edges: Tuple[Edge, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(self.qubits))
        object.__setattr__(self, "edges", tuple((int(c), int(t)) for c, t in self.edges))

    @property
    def ids(self) -> List[int]:
        return [q.id for q in self.qubits]

    def qubit(self, qubit_id: int) -> QubitRecord:
        for q in self.qubits:
            if q.id == qubit_id:
                return q
        raise ParameterError(f"Unknown qubit id {qubit_id}")

    def graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(self.ids)
        g.add_edges_from(self.edges)
        return g

    def neighbors(self, qubit_id: int) -> List[int]:
        return sorted(self.graph().neighbors(qubit_id))

    def max_degree(self) -> int:
        degrees = [d for _, d in self.graph().degree()]
        return max(degrees) if degrees else 0

    def frequencies(self) -> Dict[int, float]:
        return {q.id: q.f01 for q in self.qubits if q.f01 is not None}

    def with_frequencies(self, freqs: Dict[int, float]) -> "ChipState":
        qubits = tuple(replace(q, f01=freqs.get(q.id, q.f01)) for q in self.qubits)
        return replace(self, qubits=qubits)

    def validate(self, f01_window: Tuple[float, float] = (F01_MIN_MHZ, F01_MAX_MHZ)) -> "ChipState":
        seen = set()
        for q in self.qubits:
            if q.id in seen:
                raise ValidationError(f"Duplicate qubit id {q.id}", f"qubit {q.id}")
            seen.add(q.id)
            q.validate(f01_window)

        pairs = set()
        for control, target in self.edges:
            label = f"edge ({control}, {target})"
            if control == target:
                raise ValidationError(f"Self-loop on qubit {control}", label)
            for end in (control, target):
                if end not in seen:
                    raise ValidationError(f"Edge ({control}, {target}) references unknown qubit {end}", label)
            key = frozenset((control, target))
            if key in pairs:
                raise ValidationError(f"Duplicate undirected edge ({control}, {target})", label)
            pairs.add(key)
        return self


class LatticeBuilder:
    """Builds heavy-hex chip topologies from horizontal qubit lines joined by bridge qubits"""

    PRESETS = ("falcon", "hummingbird")

    @staticmethod
    def build_heavy_hex(rows: int, cols: int, r_n: float = 10000.0, name: str = None) -> ChipState:
        """
        Build a heavy-hex lattice of rows x cols hexagons

        Args:
            rows (int): Number of hexagon rows
            cols (int): Number of hexagons per row
            r_n (float): Nominal junction resistance assigned to every qubit (Ohm)
            name (str): Chip name

        Returns:
            ChipState: Connected degree-3 heavy-hex chip
        """
        if not isinstance(rows, int) or not isinstance(cols, int) or rows < 1 or cols < 1:
            raise ParameterError(f"Heavy-hex dimensions must be positive integers, got rows={rows}, cols={cols}")

        width = 4 * cols + 1 if rows == 1 else 4 * cols + 3
        lines = [(0, width)] * (rows + 1)
        bridges = []
        for pair in range(rows):
            offset = 2 * (pair % 2)
            bridges.append([offset + 4 * k for k in range(cols + 1)])

        return LatticeBuilder._from_lines(name or f"heavy-hex-{rows}x{cols}", lines, bridges, r_n)

    @staticmethod
    def build_preset(preset: str, r_n: float = 10000.0) -> ChipState:
        """Build one of the fixed-size published heavy-hex chips ('falcon': 27, 'hummingbird': 65)"""
        preset = preset.lower()
        if preset == "falcon":
            lines = [(0, 8), (0, 7), (0, 8)]
            bridges = [[0, 4], [2, 6]]
        elif preset == "hummingbird":
            lines = [(0, 10), (0, 11), (0, 11), (0, 11), (1, 10)]
            bridges = [[0, 4, 8], [2, 6, 10], [0, 4, 8], [2, 6, 10]]
        else:
            raise ParameterError(f"Unknown preset '{preset}'. Available: {', '.join(LatticeBuilder.PRESETS)}")
        return LatticeBuilder._from_lines(preset, lines, bridges, r_n)

    @staticmethod
    def _from_lines(
        name: str,
        lines: Sequence[Tuple[int, int]],
        bridges: Sequence[Iterable[int]],
        r_n: float,
    ) -> ChipState:
        # lines: (first column, length); bridges[i]: columns joining line i to line i+1
        positions: List[Dict[int, int]] = []
        edges: List[Edge] = []
        next_id = 0

        def add_line(start: int, length: int) -> Dict[int, int]:
            nonlocal next_id
            columns = {}
            for column in range(start, start + length):
                columns[column] = next_id
                if column > start:
                    edges.append((columns[column - 1], next_id))
                next_id += 1
            return columns

        positions.append(add_line(*lines[0]))
        bridge_ids = []
        for index in range(1, len(lines)):
            pair_bridges = []
            for column in bridges[index - 1]:
                if column not in positions[index - 1]:
                    raise ParameterError(f"Bridge column {column} missing on line {index - 1}")
                pair_bridges.append((column, next_id))
                next_id += 1
            bridge_ids.append(pair_bridges)
            positions.append(add_line(*lines[index]))
            for column, bridge in pair_bridges:
                if column not in positions[index]:
                    raise ParameterError(f"Bridge column {column} missing on line {index}")
                edges.append((positions[index - 1][column], bridge))
                edges.append((bridge, positions[index][column]))

        qubits = tuple(QubitRecord(id=i, r_n=r_n) for i in range(next_id))
        chip = ChipState(name=name, qubits=qubits, edges=tuple(edges)).validate()
        logger.debug(f"Built lattice {name}: {len(qubits)} qubits, {len(edges)} edges, max degree {chip.max_degree()}")
        return chip
