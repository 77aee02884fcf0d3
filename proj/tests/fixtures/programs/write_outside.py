# Tries to escape the working directory; every attempt must fail.
import sys

targets = sys.argv[1:] or ["/etc/sae-escape", "/usr/sae-escape", "/sae-escape"]
for path in targets:
    try:
        open(path, "w").write("x")
        print("wrote", path)
    except OSError:
        print("denied", path)
