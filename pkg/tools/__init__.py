"""Signal-level tools: EDF reading, filtering, spectra and electrode geometry"""
