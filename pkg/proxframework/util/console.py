from typing import List


class Color:
    GREEN = '\033[92m'
    YELLOW = '\033[93m'
    RED = '\033[91m'
    BOLD = '\033[1m'
    END = '\033[0m'


def colour(text: str, code: str) -> str:
    return f'{code}{text}{Color.END}'


def format_medians(rows: List[dict]) -> str:
    """Median table as aligned console text, failed or unconverged cells in red."""
    lines = [colour(f'{"m":>4} {"n":>4} {"method":<8} {"gamma":>6} {"iter":>8} {"error":>10} {"conv":>6}', Color.BOLD)]
    for row in sorted(rows, key=lambda i: (i['m'], i['n'], i['method'], i['gamma'])):
        text = f'{row["m"]:>4} {row["n"]:>4} {row["method"]:<8} {row["gamma"]:>6.2f} {row["iter"]:>8.0f} ' \
               f'{row["error"]:>10.2e} {row["converged"]:>6.0%}'
        if row['converged'] < 1:
            text = colour(text, Color.RED if row['converged'] == 0 else Color.YELLOW)
        lines.append(text)
    return '\n'.join(lines)
