"""Walk items through the bin controller and watch the disc move."""

from smartbin.bin_controller import (
    BIO,
    NONBIO,
    BinEvent,
    BinState,
    EventKind,
    item_script,
    run_simulation,
    step,
)
from smartbin.detection import Detection

# A biodegradable item, a non-biodegradable one, and one whose detections the
# controller classifies itself (the 0.8 box of category 0 wins).
script = item_script([BIO, NONBIO, [Detection((0.5, 0.5, 0.3, 0.3), 0, 0.8),
                                    Detection((0.2, 0.7, 0.1, 0.1), 1, 0.3)]])

for entry in run_simulation(script):
    moves = " ".join(f"-> servo {c.target_angle:+.0f} deg" for c in entry.commands)
    t = "start" if entry.t_ms is None else f"{entry.t_ms:5d} ms"
    print(f"{t:>8}  {entry.state.phase.value:<24} counts {entry.state.compartment_counts}  {moves}")

# A dark compartment: the camera times out three times and the item is routed
# to the non-biodegradable side as a precaution.
state = BinState()
for ev in [BinEvent.item_arrived()] + [BinEvent.of(EventKind.TIMEOUT)] * 4:
    state, cmds = step(state, ev)
print("\nafter repeated capture timeouts:", state.phase.value, state.verdict)

# An out-of-order event faults the machine. Reset brings it home.
state, _ = step(BinState(), BinEvent.of(EventKind.DUMP_DONE))
print("out-of-order event:", state.phase.value, "|", state.diagnostic)
state, _ = step(state, BinEvent.of(EventKind.RESET))
print("after reset:", state.phase.value)
