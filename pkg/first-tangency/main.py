from critset import config, manifolds


def run_first_tangency(b=0.3, a_range=(1.0, 6.0), tol=1e-6, budgets=(50.0, 50.0)):
    """
    Bisect for the first homoclinic tangency of the outer Hénon saddle.

    Args:
        b: Hénon parameter b
        a_range: Bracket (a_lo, a_hi)
        tol: Final bracket width
        budgets: Unstable and stable arclength budgets at a_hi

    Returns:
        TangencyReport
    """
    threads = config.resolve_threads("auto")
    print(f"Bisecting a in [{a_range[0]}, {a_range[1]}] for b = {b} on {threads} threads...")
    return manifolds.first_tangency(b, a_range, budgets=budgets, tol=tol, threads=threads)


def analyze_results(report):
    """Print the tangency and its critical iterate."""
    print("\n" + "=" * 60)
    print("FIRST TANGENCY RESULTS")
    print("=" * 60)

    lo, hi = report.bracket
    print(f"\nb = {report.family_b}")
    print(f"a* = {report.a_star:.9f} (bracket [{lo:.9f}, {hi:.9f}])")
    print(f"Bisection steps: {report.bisection_steps}")
    print(f"Interior intersections at a_hi: {report.counts['a_hi']}")
    print(f"Lobes tracked: {report.counts['lobes']}, closing in the final bracket: {report.counts['closing']}")

    print("\nTangency:")
    print(f"  Point: ({report.tangency_point[0]:.6f}, {report.tangency_point[1]:.6f})")
    print(f"  Angle between branches: {report.tangency_angle:.3e} rad")
    print(f"  Gap between branches: {report.contact_gap:.3e}")
    print(f"  Contact angle at the bracket top: {report.pair_angle:.3e} rad")
    print(f"  Leg mismatch: {report.leg_mismatch:.3e}")

    print("\nCritical iterate:")
    print(f"  Iterate: {report.critical_iterate}")
    x, y = report.critical_point_estimate
    print(f"  Point: ({x:.6f}, {y:.6f})")
    print(f"  Direction: {report.critical_direction:.6f} rad")
    print(f"  Window score: {report.critical_score:.4f}")
    print(f"  Best direction: {report.critical_best_direction:.6f} rad (mismatch {report.direction_mismatch:.3e})")

    print("\nWindow scores along the tangency orbit (top 5):")
    top = sorted(report.iterate_scores, key=lambda item: item[1], reverse=True)[:5]
    for n, score in top:
        marker = "← critical" if n == report.critical_iterate else ""
        print(f"  n = {n:4d}: {score:.4f} {marker}")

    if report.critical_score >= -0.2:
        print("\n✓ The critical iterate is critical at this window.")
    else:
        print("\n✗ The critical iterate scores below -0.2 at this window.")


if __name__ == "__main__":
    try:
        print("Locating the first homoclinic tangency in the Hénon family...")
        print("\nAt a tangency the stable and unstable manifolds of the saddle")
        print("touch, and some iterate of the tangency point is critical.\n")

        report = run_first_tangency()
        analyze_results(report)

    except Exception as e:
        print(f"Error during execution: {str(e)}")
