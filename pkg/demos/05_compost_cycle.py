"""Fourteen days in the composting compartment."""

from dataclasses import replace

from smartbin.compost import composition_report, first_day_reaching, load_preset, run_cycle

preset = load_preset("paper-default")
fs = preset.feedstock
print(f"feedstock: {fs.mass_kg:.0f} kg wet, C:N {fs.cn_ratio:.1f}, moisture {fs.moisture_frac:.2f}")

final, series = run_cycle(fs, preset.compartment, preset.config)

print("\nday   T (C)  moisture   C:N")
for s in series:
    print(f"{s.day:4.0f}  {s.temperature_C:6.2f}  {s.moisture_frac:8.3f}  {s.cn_ratio:5.2f}")

print()
print(composition_report(final).format())

# Without the activator the pile warms more slowly.
for strength in (0.0, 0.5, 1.0):
    _, fine = run_cycle(replace(fs, activator_strength=strength), preset.compartment, preset.config,
                        every_step=True)
    day = first_day_reaching(fine, 55.0)
    print(f"activator {strength:.1f}: reaches 55 C on day", "never" if day is None else f"{day:.2f}")
