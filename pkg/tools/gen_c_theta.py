"""Print the grid estimates of C_theta that are frozen in fracreg.spectral.PUBLISHED_C_THETA."""

from fracreg.spectral import estimate_c_theta

THETAS = (0.3, 0.5, 0.8, 1.0, 1.2, 1.5, 1.8, 1.9, 1.95)


def main():
    print("PUBLISHED_C_THETA: dict[float, float] = {")
    for theta in THETAS:
        # round up in the 6th significant digit so the frozen value never undercuts the estimate
        value = estimate_c_theta(theta)
        print(f"    {theta}: {float(f'{value * (1 + 1e-6):.6g}')!r},")
    print("}")


if __name__ == "__main__":
    main()
