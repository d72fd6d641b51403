"""Interactive resolution workflow: analyze, present, accept/reject, repeat.

The session is a value: every operation returns a new :class:`Session`.
Over-constraint is resolved before under-constraint (well-part detection
requires a dependency-free system), one part or part-pair at a time, with the
ranked options of the current target presented for decision.  Every decision
lands in a journal whose replay against the initial model reproduces the
final model exactly.
"""

from __future__ import annotations

import enum
import itertools
import json
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .analyze import ConstraintState, classify
from .errors import (
    ForcedRemovalError,
    InvalidWitnessError,
    PhaseError,
    SessionError,
    StaleOptionError,
    UndoEmptyError,
    UnresolvableError,
)
from .linearize import build_perturbation_system, witness_residual
from .model import (
    EPS_WITNESS,
    Constraint,
    ConstraintKind,
    Model,
    constraint_to_document,
)
from .options import (
    ResolutionOption,
    apply_option,
    over_options,
    revalidate,
    under_options,
)
from .overdetect import OverPart, detect_minimal_over_parts
from .prioritize import prioritize
from .welldetect import WellPart, detect_maximal_well_parts


class Phase(str, enum.Enum):
    IDLE = "Idle"
    OVER = "OverResolution"
    UNDER = "UnderResolution"
    DONE = "WellDone"


@dataclass(frozen=True)
class Presentation:
    """What the decision maker sees for the current target."""

    state: ConstraintState
    phase: Phase
    over_parts: Tuple[OverPart, ...]
    well_parts: Tuple[WellPart, ...]
    target_key: str
    options: Tuple[ResolutionOption, ...]
    forced: bool
    revision: int

    @property
    def top(self) -> ResolutionOption:
        return self.options[0]

    def find(self, option_id: str) -> Optional[ResolutionOption]:
        for opt in self.options:
            if opt.id == option_id:
                return opt
        return None


@dataclass(frozen=True)
class JournalEntry:
    seq: int
    action: str                      # "remove" | "add" | "undo"
    constraint: Optional[dict]
    verdict: Optional[str]           # "accept" | "reject"
    pre_state: dict
    post_state: dict
    timestamp: float


@dataclass(frozen=True)
class _Snapshot:
    model: Model
    phase: Phase
    presentation: Optional[Presentation]
    rejected: Tuple[Tuple[str, Tuple[str, ...]], ...]


@dataclass(frozen=True)
class Session:
    initial_model: Model
    model: Model
    phase: Phase
    state: ConstraintState
    presentation: Optional[Presentation]
    journal: Tuple[JournalEntry, ...] = ()
    undo_stack: Tuple[_Snapshot, ...] = ()
    rejected: Tuple[Tuple[str, Tuple[str, ...]], ...] = ()
    seen_options: Tuple[str, ...] = ()


def _rejected_map(rejected) -> Dict[str, set]:
    return {key: set(ids) for key, ids in rejected}


def _freeze_rejected(mapping: Mapping[str, set]):
    return tuple(sorted((k, tuple(sorted(v))) for k, v in mapping.items() if v))


def _state_doc(state: ConstraintState) -> dict:
    return {
        "over": state.over,
        "under": state.under,
        "over_dim": state.over_dim,
        "under_dim": state.under_dim,
    }


def _over_key(part: OverPart) -> str:
    return "over:" + ",".join(sorted(part.constraints))


def _pair_key(a: WellPart, b: WellPart) -> str:
    sides = sorted(",".join(sorted(p.entities)) for p in (a, b))
    return "pair:" + "|".join(sides)


def _build_presentation(
    model: Model,
    state: ConstraintState,
    rejected: Mapping[str, set],
    revision: int,
) -> Optional[Presentation]:
    if state.well:
        return None
    ps = build_perturbation_system(model)
    if state.over:
        parts = tuple(detect_minimal_over_parts(model, ps))
        part = parts[0]
        key = _over_key(part)
        struck = rejected.get(key, set())
        opts = [o for o in over_options(part, model) if o.id not in struck]
        if not opts:
            raise UnresolvableError(
                f"every removal option of part {part.constraints} was rejected"
            )
        ranked = tuple(prioritize(opts, "over", model, ps, part=part))
        return Presentation(
            state=state,
            phase=Phase.OVER,
            over_parts=parts,
            well_parts=(),
            target_key=key,
            options=ranked,
            forced=len(ranked) == 1,
            revision=revision,
        )

    parts = tuple(detect_maximal_well_parts(model, ps))
    pair_order = sorted(
        itertools.combinations(range(len(parts)), 2), key=lambda ij: (ij[1], ij[0])
    )
    for i, j in pair_order:
        key = _pair_key(parts[i], parts[j])
        struck = rejected.get(key, set())
        opts = [
            o for o in under_options(parts[i], parts[j], model, ps) if o.id not in struck
        ]
        if not opts:
            continue
        ranked = tuple(prioritize(opts, "under", model, ps))
        return Presentation(
            state=state,
            phase=Phase.UNDER,
            over_parts=(),
            well_parts=parts,
            target_key=key,
            options=ranked,
            forced=False,
            revision=revision,
        )
    raise UnresolvableError(
        "under-constraint persists but no part pair admits a valid bridging "
        "constraint"
    )


def start(m: Model) -> Session:
    """Open a session on a witness-valid model (typically a post-edit update)."""
    resid = witness_residual(m)
    if resid > EPS_WITNESS:
        raise InvalidWitnessError(
            f"model is not witness-valid (residual {resid:.3g})"
        )
    state = classify(m)
    presentation = _build_presentation(m, state, {}, revision=0)
    phase = Phase.DONE if presentation is None else presentation.phase
    seen = tuple(o.id for o in presentation.options) if presentation else ()
    return Session(
        initial_model=m,
        model=m,
        phase=phase,
        state=state,
        presentation=presentation,
        seen_options=seen,
    )


def step(s: Session) -> Presentation:
    """Current presentation; errors once the session is done."""
    if s.presentation is None:
        raise PhaseError("session is already well-constrained")
    return s.presentation


def _advance(
    s: Session,
    model: Model,
    rejected: Mapping[str, set],
    entry: JournalEntry,
) -> Session:
    state = classify(model)
    revision = (s.presentation.revision + 1) if s.presentation else 0
    presentation = _build_presentation(model, state, rejected, revision)
    phase = Phase.DONE if presentation is None else presentation.phase
    snapshot = _Snapshot(
        model=s.model,
        phase=s.phase,
        presentation=s.presentation,
        rejected=s.rejected,
    )
    seen = set(s.seen_options)
    if presentation:
        seen.update(o.id for o in presentation.options)
    return Session(
        initial_model=s.initial_model,
        model=model,
        phase=phase,
        state=state,
        presentation=presentation,
        journal=s.journal + (entry,),
        undo_stack=s.undo_stack + (snapshot,),
        rejected=_freeze_rejected(rejected),
        seen_options=tuple(sorted(seen)),
    )


def _require_current(s: Session, option: ResolutionOption) -> ResolutionOption:
    if s.presentation is None:
        raise PhaseError("session is already well-constrained")
    found = s.presentation.find(option.id)
    if found is None:
        raise StaleOptionError(f"option {option.id} is not in the current presentation")
    return found


def accept(s: Session, option: ResolutionOption) -> Session:
    """Apply an option from the current presentation and re-analyze."""
    option = _require_current(s, option)
    model = apply_option(s.model, option)
    resid = witness_residual(model)
    if resid > EPS_WITNESS:
        raise InvalidWitnessError(
            f"accepting {option.describe()} broke witness validity ({resid:.3g})"
        )
    pre = _state_doc(s.state)
    post = _state_doc(classify(model))
    entry = JournalEntry(
        seq=len(s.journal),
        action=option.action,
        constraint=constraint_to_document(option.constraint),
        verdict="accept",
        pre_state=pre,
        post_state=post,
        timestamp=time.time(),
    )
    return _advance(s, model, _rejected_map(s.rejected), entry)


def reject(s: Session, option: ResolutionOption) -> Session:
    """Strike an option from the current target; it stays struck for this target."""
    option = _require_current(s, option)
    pres = s.presentation
    if pres.phase is Phase.OVER and len(pres.options) == 1:
        raise ForcedRemovalError(
            "a minimal over-constrained part requires removing one of its "
            "constraints; the last remaining option cannot be rejected"
        )
    rejected = _rejected_map(s.rejected)
    rejected.setdefault(pres.target_key, set()).add(option.id)
    entry = JournalEntry(
        seq=len(s.journal),
        action=option.action,
        constraint=constraint_to_document(option.constraint),
        verdict="reject",
        pre_state=_state_doc(s.state),
        post_state=_state_doc(s.state),
        timestamp=time.time(),
    )
    return _advance(s, s.model, rejected, entry)


def undo(s: Session) -> Session:
    """Restore the previous snapshot; the undo itself is journaled."""
    if not s.undo_stack:
        raise UndoEmptyError("nothing to undo")
    snap = s.undo_stack[-1]
    entry = JournalEntry(
        seq=len(s.journal),
        action="undo",
        constraint=None,
        verdict=None,
        pre_state=_state_doc(s.state),
        post_state=_state_doc(classify(snap.model)),
        timestamp=time.time(),
    )
    return Session(
        initial_model=s.initial_model,
        model=snap.model,
        phase=snap.phase,
        state=classify(snap.model),
        presentation=snap.presentation,
        journal=s.journal + (entry,),
        undo_stack=s.undo_stack[:-1],
        rejected=snap.rejected,
        seen_options=s.seen_options,
    )


def auto_resolve(s: Session, max_probes: Optional[int] = None) -> Session:
    """Accept the top suggestion until the model is well-constrained.

    Acceptances can dead-end: a direction-only option taken early may make
    every later offset-pinning candidate redundant.  When that happens the
    top-suggestion path is abandoned depth-first and the next-ranked option
    is tried, so the final journal still reads as a plain sequence of
    acceptances.
    """
    if max_probes is None:
        max_probes = 16 * (s.state.over_dim + s.state.under_dim + len(s.model.entities) + 4)
    stack: List[Tuple[Session, int]] = [(s, 0)]
    probes = 0
    while stack:
        current, idx = stack[-1]
        if current.phase is Phase.DONE:
            return current
        options = current.presentation.options
        if idx >= len(options):
            stack.pop()
            continue
        stack[-1] = (current, idx + 1)
        if probes >= max_probes:
            raise UnresolvableError(
                f"auto-resolution exceeded {max_probes} acceptance probes"
            )
        probes += 1
        try:
            advanced = accept(current, options[idx])
        except UnresolvableError:
            continue
        stack.append((advanced, 0))
    raise UnresolvableError(
        "every acceptance sequence dead-ends; no valid resolution exists"
    )


def state_document(state: ConstraintState) -> dict:
    doc = _state_doc(state)
    doc["well"] = state.well
    return doc


def presentation_document(s: Session) -> dict:
    """JSON-ready view of the session's current presentation."""
    doc = {
        "phase": s.phase.value,
        "state": state_document(s.state),
        "over_parts": [],
        "well_parts": [],
        "target": None,
        "options": [],
        "forced": False,
        "revision": s.presentation.revision if s.presentation else -1,
    }
    pres = s.presentation
    if pres is None:
        return doc
    doc["over_parts"] = [
        {"constraints": list(p.constraints), "rows": list(p.rows)}
        for p in pres.over_parts
    ]
    doc["well_parts"] = [
        {"entities": list(p.entities), "rank": p.rank_order} for p in pres.well_parts
    ]
    doc["target"] = pres.target_key
    doc["forced"] = pres.forced
    doc["options"] = [
        {
            "id": o.id,
            "action": o.action,
            "constraint": constraint_to_document(o.constraint),
            "precedence": o.precedence,
            "score": o.score,
            "description": o.describe(),
        }
        for o in pres.options
    ]
    return doc


# ---------------------------------------------------------------------------
# Journal export / replay

def journal_jsonl(s: Session) -> str:
    """One JSON object per decision, in order."""
    lines = []
    for e in s.journal:
        lines.append(
            json.dumps(
                {
                    "seq": e.seq,
                    "action": e.action,
                    "constraint": e.constraint,
                    "verdict": e.verdict,
                    "pre_state": e.pre_state,
                    "post_state": e.post_state,
                },
                sort_keys=True,
            )
        )
    return "\n".join(lines) + ("\n" if lines else "")


def _match_option(pres: Presentation, action: str, cdoc: dict) -> ResolutionOption:
    for opt in pres.options:
        c = opt.constraint
        if opt.action != action or c.kind.value != cdoc["kind"]:
            continue
        if list(c.entities) != list(cdoc["entities"]):
            continue
        if action == "remove" and c.id != cdoc["id"]:
            continue
        a = cdoc.get("parameter")
        b = c.parameter
        if (a is None) != (b is None):
            continue
        if a is not None:
            internal = math.radians(a) if c.kind is ConstraintKind.ANGLE else a
            if not math.isclose(internal, b, rel_tol=1e-9, abs_tol=1e-9):
                continue
        return opt
    raise SessionError(
        f"journal refers to an option that is not presented: {action} {cdoc}"
    )


def replay_journal(initial_model: Model, jsonl: str) -> Session:
    """Re-run a journal against the initial model; deterministic by design."""
    s = start(initial_model)
    for line in jsonl.splitlines():
        line = line.strip()
        if not line:
            continue
        entry = json.loads(line)
        if entry["action"] == "undo":
            s = undo(s)
            continue
        if s.presentation is None:
            raise SessionError("journal continues past a well-constrained state")
        opt = _match_option(s.presentation, entry["action"], entry["constraint"])
        if entry["verdict"] == "accept":
            s = accept(s, opt)
        elif entry["verdict"] == "reject":
            s = reject(s, opt)
        else:
            raise SessionError(f"unknown verdict {entry['verdict']!r}")
    return s
