import math

import numpy as np

from critset import cocycle, criticality, domination, dynamics, geometry
from critset.errors import DegenerateAngle


MODELS = {
    "saddle diag(2, 1/2)": geometry.diag(2.0, 0.5),
    "shear [[1, 1], [0, 1]]": np.array([[1.0, 1.0], [0.0, 1.0]]),
    "rotation by 0.7": geometry.rotation(0.7),
    "homothety 2I": 2.0 * np.eye(2),
    "node diag(3, 2)": geometry.diag(3.0, 2.0),
}


def run_model(name, matrix, window=20):
    """
    Score one linear model and test it for domination.

    The criticality score of a linear map is the same at every point, so the
    origin stands in for the whole plane.

    Args:
        name: Label for the printout
        matrix: 2x2 invertible matrix
        window: Criticality window N

    Returns:
        Dictionary with the class, score and splitting verdict
    """
    map_def = dynamics.MapDef.linear(matrix)
    origin = np.zeros(2)
    report = criticality.criticality_score(map_def, origin, window)

    try:
        splitting = domination.estimate_splitting(map_def, origin, 20)
        angle = splitting.angle
    except DegenerateAngle:
        splitting, angle = None, None

    return {
        "name": name,
        "class": geometry.classify_linear(matrix),
        "report": report,
        "splitting": splitting,
        "angle": angle,
        "lyapunov": cocycle.lyapunov(map_def, origin, 50),
    }


def analyze_results(results):
    """Print a summary of every linear model."""
    print("\n" + "=" * 60)
    print("LINEAR MODELS")
    print("=" * 60)

    for r in results:
        report = r["report"]
        print(f"\n{r['name']}")
        print(f"  Class: {r['class'].value}")
        print(f"  Score (N = {report.window[1]}): {report.score:.6f}")
        print(f"  Best direction: {report.best_direction:.6f} rad")
        print(f"  Lyapunov exponents: {r['lyapunov'].lambda_plus:.4f}, {r['lyapunov'].lambda_minus:.4f}")
        if r["splitting"] is None:
            print("  Splitting: none resolvable")
        else:
            print(f"  Splitting: E = {r['splitting'].E:.4f}, F = {r['splitting'].F:.4f} (angle {r['angle']:.4f})")
        if report.score >= -1e-9:
            print("  ✓ Every point is critical at this window")
        else:
            print("  ✗ No critical direction at this window")

    saddle = next(r for r in results if r["class"] is geometry.LinearClass.HYPERBOLIC_SADDLE)
    N = saddle["report"].window[1]
    closed_form = -math.log(math.cosh(2 * N * math.log(2.0)))
    print(f"\nSaddle closed form: {closed_form:.6f}, computed: {saddle['report'].score:.6f}")


if __name__ == "__main__":
    try:
        print("Scoring linear models of the plane...")
        print("\nConformal and parabolic maps have critical points everywhere;")
        print("hyperbolic saddles have none.\n")

        results = [run_model(name, matrix) for name, matrix in MODELS.items()]
        analyze_results(results)

    except Exception as e:
        print(f"Error during execution: {str(e)}")
