"""
Test Script - Verify System Components
Run this to smoke-test the toolkit before long sweeps (also collected by pytest)
"""
import math

import numpy as np


def test_imports():
    """Test that all modules can be imported"""
    print("\n" + "="*80)
    print("TEST 1: Module Imports")
    print("="*80)

    modules = [
        'config',
        'logger',
        'henon_family',
        'cocycle',
        'manifolds',
        'stable_leaves',
        'critical_structure',
        'binding',
        'bifurcation_sweep',
        'escape_stats',
        'exporter',
        'main',
    ]

    for module_name in modules:
        __import__(module_name)
        print(f"  ✓ {module_name}")


def test_configuration():
    """Test configuration loading"""
    print("\n" + "="*80)
    print("TEST 2: Configuration")
    print("="*80)

    from config import CONSTANTS_DEFAULTS, DIRS, ESCAPE_CONFIG, SWEEP_CONFIG, validate_config

    print(f"  ✓ Directories: {list(DIRS.keys())}")
    print(f"  ✓ Constants: {CONSTANTS_DEFAULTS}")
    print(f"  ✓ eps ladder: {SWEEP_CONFIG['eps_ladder']}")
    print(f"  ✓ Escape horizon: {ESCAPE_CONFIG['T']}")

    assert validate_config()
    print("  ✓ Configuration validated")


def test_logger():
    """Test logging system"""
    print("\n" + "="*80)
    print("TEST 3: Logging System")
    print("="*80)

    from logger import logger

    logger.info("Test info message")
    logger.debug("Test debug message")
    logger.warning("Test warning message")
    print("  ✓ Test messages logged")

    report = logger.create_run_report('TEST_001', 'testing', {'test': 'system_test', 'status': 'running'})
    assert report.exists()
    print(f"  ✓ Run report created: {report}")


def test_degenerate_family():
    """Test the b = 0 family against closed forms"""
    print("\n" + "="*80)
    print("TEST 4: Degenerate Family")
    print("="*80)

    from henon_family import FamilyParams, apply
    from manifolds import find_fixed_points

    params = FamilyParams(2.0, 0.0)
    P, Q = find_fixed_points(params)
    print(f"  ✓ P = {tuple(P.location)}, Q = {tuple(Q.location)}")
    assert math.isclose(P.location[0], 0.5, abs_tol=1e-12)
    assert math.isclose(Q.location[0], -1.0, abs_tol=1e-12)

    assert np.allclose(apply(params, [0.0, 0.0]), [1.0, 0.0])
    print("  ✓ Critical value f(0) = 1")


def test_cocycle():
    """Test derivative growth along the critical orbit at a = 2"""
    print("\n" + "="*80)
    print("TEST 5: Derivative Cocycle")
    print("="*80)

    from cocycle import wi_sequence
    from henon_family import FamilyParams

    params = FamilyParams(2.0, 0.0)
    history = wi_sequence(params, [0.0, 0.0], 6)
    norms = np.exp(history.log_norms())
    print(f"  ✓ |w_i| = {np.round(norms, 6).tolist()}")
    assert np.allclose(norms, 4.0 ** np.arange(len(norms)))


def test_runner():
    """Test command-line runner setup"""
    print("\n" + "="*80)
    print("TEST 6: Command-Line Runner")
    print("="*80)

    from config import resolve_run_config
    from main import ToolkitRunner, build_parser

    runner = ToolkitRunner(resolve_run_config(overrides={'b': 0.0}))
    print("  ✓ Runner initialized")

    run_id = runner.generate_run_id()
    print(f"  ✓ Run ID generated: {run_id}")
    assert len(run_id.split('_')) == 3

    parser = build_parser()
    args = parser.parse_args(['escape', 'grid', '--T', '10'])
    assert (args.command, args.action, args.T) == ('escape', 'grid', 10)
    print("  ✓ Argument parser working")


def test_directory_structure():
    """Test directory structure"""
    print("\n" + "="*80)
    print("TEST 7: Directory Structure")
    print("="*80)

    from config import DIRS

    for name, path in DIRS.items():
        assert path.exists(), f"{name} NOT FOUND: {path}"
        print(f"  ✓ {name:12} {path}")


def run_all_tests():
    """Run all tests and provide summary"""
    print("\n" + "="*80)
    print(" HENON-LIKE BIFURCATION TOOLKIT - COMPONENT TESTS")
    print("="*80)

    tests = [
        ("Module Imports", test_imports),
        ("Configuration", test_configuration),
        ("Logging System", test_logger),
        ("Degenerate Family", test_degenerate_family),
        ("Derivative Cocycle", test_cocycle),
        ("Command-Line Runner", test_runner),
        ("Directory Structure", test_directory_structure),
    ]

    results = []

    for test_name, test_func in tests:
        try:
            test_func()
            results.append((test_name, True))
        except Exception as e:
            print(f"\n  ❌ {test_name} failed: {e}")
            results.append((test_name, False))

    # Summary
    print("\n" + "="*80)
    print(" TEST SUMMARY")
    print("="*80 + "\n")

    passed = sum(1 for _, result in results if result)
    total = len(results)

    for test_name, result in results:
        status = "✓ PASS" if result else "❌ FAIL"
        print(f"{status:10} {test_name}")

    print("\n" + "-"*80)
    print(f"Results: {passed}/{total} tests passed")
    print("-"*80 + "\n")

    if passed == total:
        print("ALL TESTS PASSED!")
        print("\nThe toolkit is ready to use:")
        print("  • Command Line: python main.py --help")
        print("  • Full suite:   pytest")
        print("\n" + "="*80 + "\n")
        return 0
    else:
        print("⚠ SOME TESTS FAILED!")
        print("\nPlease address the failed tests above.")
        print("Run 'python setup.py' for diagnosis.\n")
        print("="*80 + "\n")
        return 1

if __name__ == '__main__':
    exit(run_all_tests())
