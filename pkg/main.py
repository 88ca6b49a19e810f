from geobench.cli import dispatch

if __name__ == "__main__":
    raise SystemExit(dispatch())
