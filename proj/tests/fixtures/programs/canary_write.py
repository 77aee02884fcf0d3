# Leaves files behind in the working directory and /tmp.
open("canary.txt", "w").write("left behind\n")
open("/tmp/canary.txt", "w").write("left behind\n")
print("wrote")
