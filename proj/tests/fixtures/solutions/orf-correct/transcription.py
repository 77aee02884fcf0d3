def transcribe(dna):
    return dna.replace("T", "U")
