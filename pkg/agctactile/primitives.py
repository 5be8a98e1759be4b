from typing import NewType

FrameId = NewType("FrameId", str)  # Opaque frame identifier, e.g. "R", "B", "C", "T", "H"
PhantomId = NewType("PhantomId", str)  # Phantom identifier, e.g. "III-07"
