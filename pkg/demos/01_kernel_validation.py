"""Check a 2D Riesz kernel against the kernel conditions and print each verdict."""
from rieszgas.grid import Grid
from rieszgas.kernels import fourier_symbol, riesz, validate_riesz_type

spec = riesz(2, 0.5)
grid = Grid.cube(2, 4.0, 128)
print(f"kernel {spec.family} d={spec.d} s={spec.s}: g-hat(1) = {fourier_symbol(spec, [[1.0, 0.0]]).item():.6f} (symbol |xi|^-2s)")
report = validate_riesz_type(spec, grid)
for item, verdict in report.verdicts().items():
    note = report.items[item].note
    print(f"  item {item:2d}: {verdict}" + (f"  ({note})" if note else ""))
print("all checked items pass:", report.passed)
