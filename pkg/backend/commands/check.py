"""
Comando check: bateria de autoverificação
"""

from services.self_check import run_self_check


def register(subparsers, parents=()):
    parser = subparsers.add_parser("check", parents=list(parents), help="roda a autoverificação de invariantes")
    parser.set_defaults(handler=handle)


def handle(args) -> int:
    results = run_self_check()
    for result in results:
        status = "OK  " if result.passed else "FALHA"
        print(f"[{status}] {result.name}: {result.detail}")
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} verificações passaram")
    return 0 if failed == 0 else 2
