"""Block tree, checkpoints, and the checkpoint-aware fork-choice rule.

Blocks carry sequential integer ids. Work is measured by height, so the
"heaviest" chain is simply the tallest one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

from .errors import DomainError, DuplicateId, InvalidBlock, UnknownBlock, UnknownParent
from .params import DEFAULT_PARAMS, ProtocolParams


@dataclass(frozen=True, slots=True)
class Block:
    id: int
    parent: Optional[int]
    height: int
    proposer: Optional[str] = None
    seen_at: float = 0.0


class ChainView:
    """One observer's set of known blocks.

    Blocks are only ever added. Ancestor queries use skew-binary jump
    pointers so ``ancestor_at`` runs in O(log height).
    """

    def __init__(self):
        self.blocks: dict[int, Block] = {}
        self.genesis: Optional[int] = None
        self.justified: dict[int, float] = {}
        self.known_finalized: dict[int, None] = {}
        self.seen_order: dict[int, int] = {}
        self._jump: dict[int, int] = {}
        self._leaves: dict[int, None] = {}

    def __len__(self):
        return len(self.blocks)

    def __contains__(self, block_id):
        return block_id in self.blocks

    def add(self, block: Block) -> None:
        if block.id in self.blocks:
            raise DuplicateId(f"block {block.id} already known")
        if block.parent is None:
            if self.genesis is not None:
                raise UnknownParent(f"block {block.id} has no parent and genesis is already set")
            if block.height != 0:
                raise InvalidBlock(f"genesis must have height 0, got {block.height}")
            self.genesis = block.id
            self._jump[block.id] = block.id
            self.justified[block.id] = math.inf
            self.known_finalized[block.id] = None
        else:
            parent = self.blocks.get(block.parent)
            if parent is None:
                raise UnknownParent(f"parent {block.parent} of block {block.id} is unknown")
            if block.height != parent.height + 1:
                raise InvalidBlock(
                    f"block {block.id} has height {block.height}, parent height is {parent.height}"
                )
            jump = self._jump[parent.id]
            blocks = self.blocks
            if parent.height - blocks[jump].height == blocks[jump].height - blocks[self._jump[jump]].height:
                self._jump[block.id] = self._jump[jump]
            else:
                self._jump[block.id] = parent.id
            self._leaves.pop(parent.id, None)
        self.blocks[block.id] = block
        self.seen_order[block.id] = len(self.seen_order)
        self._leaves[block.id] = None

    def get(self, block_id: int) -> Block:
        try:
            return self.blocks[block_id]
        except KeyError:
            raise UnknownBlock(f"block {block_id} is unknown") from None

    def height(self, block_id: int) -> int:
        return self.get(block_id).height

    def leaves(self) -> list[int]:
        return list(self._leaves)

    def ancestor_at(self, block_id: int, height: int) -> int:
        """Return the block at ``height`` on the chain of ``block_id``."""
        blocks = self.blocks
        block = self.get(block_id)
        if height < 0 or height > block.height:
            raise DomainError(f"height {height} is outside chain of block {block_id}")
        jump = self._jump
        while block.height > height:
            j = blocks[jump[block.id]]
            block = j if j.height >= height else blocks[block.parent]
        return block.id

    def is_ancestor(self, ancestor: int, block_id: int) -> bool:
        """True iff ``ancestor`` lies on the chain of ``block_id`` (itself included)."""
        a = self.get(ancestor)
        b = self.get(block_id)
        if a.height > b.height:
            return False
        return self.ancestor_at(b.id, a.height) == a.id

    def chain(self, block_id: int) -> list[int]:
        out = []
        block = self.get(block_id)
        while True:
            out.append(block.id)
            if block.parent is None:
                return out
            block = self.blocks[block.parent]

    def copy(self) -> "ChainView":
        other = ChainView()
        other.blocks = dict(self.blocks)
        other.genesis = self.genesis
        other.justified = dict(self.justified)
        other.known_finalized = dict(self.known_finalized)
        other.seen_order = dict(self.seen_order)
        other._jump = dict(self._jump)
        other._leaves = dict(self._leaves)
        return other


def add_block(view: ChainView, block: Block) -> ChainView:
    view.add(block)
    return view


def chain_of(view: ChainView, block_id: int) -> list[int]:
    """The chain (B, P(B), ..., genesis) as a list of ids."""
    return view.chain(block_id)


def epoch_of(height: int, l: int) -> int:
    return height // l


def is_checkpoint(height: int, l: int) -> bool:
    return height % l == 0


def checkpoint_at(view: ChainView, block_id: int, epoch: int, l: int) -> int:
    """Checkpoint of ``epoch`` on the chain of ``block_id``."""
    return view.ancestor_at(block_id, epoch * l)


def _finality_sources(finality) -> list:
    if finality is None:
        return []
    if hasattr(finality, "justified"):
        return [finality]
    return list(finality)


def fork_choice(view: ChainView, finality=None, params: ProtocolParams = DEFAULT_PARAMS) -> int:
    """Pick the head block.

    Leaves are ranked by the epoch of the highest justified checkpoint on
    their chain, then by height, then by arrival order. Justified
    checkpoints whose recorded total deposit is below
    ``params.min_fork_choice_deposit`` are ignored. Leaves whose chain
    drops a known finalized checkpoint are never chosen; when the known
    finalized checkpoints conflict, the one seen first wins.
    """
    if view.genesis is None:
        raise DomainError("fork choice on an empty view")
    sources = _finality_sources(finality)
    justified = dict(view.justified)
    finalized = dict(view.known_finalized)
    for src in sources:
        for cp, dep in src.justified.items():
            if dep > justified.get(cp, -math.inf):
                justified[cp] = dep
        for cp in src.finalized:
            finalized.setdefault(cp, None)

    candidates = sorted(view.leaves())
    for cp in sorted((f for f in finalized if f in view), key=view.seen_order.__getitem__):
        narrowed = [c for c in candidates if view.is_ancestor(cp, c)]
        if narrowed:
            candidates = narrowed

    l = params.epoch_length
    counted = sorted(
        (cp for cp, dep in justified.items()
         if cp in view and (dep >= params.min_fork_choice_deposit or cp == view.genesis)),
        key=lambda cp: view.blocks[cp].height,
        reverse=True,
    )

    def justified_epoch(leaf: int) -> int:
        for cp in counted:
            if view.is_ancestor(cp, leaf):
                return view.blocks[cp].height // l
        return 0

    return min(
        candidates,
        key=lambda c: (-justified_epoch(c), -view.blocks[c].height, view.seen_order[c]),
    )


def longest_chain_head(view: ChainView) -> int:
    """Plain proof-of-work rule: tallest leaf, first seen on ties."""
    return min(view.leaves(), key=lambda c: (-view.blocks[c].height, view.seen_order[c]))


def overtake_probability(alpha: float, k: int) -> float:
    """Chance that an attacker with mining share ``alpha`` catches up from ``k`` blocks behind."""
    if not 0 < alpha < 0.5:
        raise DomainError(f"alpha must lie in (0, 0.5), got {alpha}")
    if k < 0:
        raise DomainError(f"k must be >= 0, got {k}")
    return min(1.0, max(0.0, (alpha / (1 - alpha)) ** k))


def linear_view(n_blocks: int, start_id: int = 0) -> ChainView:
    """A view holding one chain of ``n_blocks`` blocks (genesis included)."""
    view = ChainView()
    view.add(Block(start_id, None, 0))
    for h in range(1, n_blocks):
        view.add(Block(start_id + h, start_id + h - 1, h))
    return view
