"""Object-detector models and action classes."""

OBJECT_CLASSES = (
    "bag", "bench", "bicycle", "big-ball", "cage", "car", "cardboard-box", "cart",
    "chair", "dog", "door", "ladder", "mailbox", "microwave", "motorcycle", "person",
    "person-crouch", "person-down", "skateboard", "small-ball", "suv", "table",
    "toy-truck", "tripod", "truck",
)
OBJECT_INDEX = {c: i for i, c in enumerate(OBJECT_CLASSES)}

PERSON_MODELS = ("person", "person-crouch", "person-down")

ACTION_CLASSES = (
    "approached", "arrived", "attached", "bounced", "buried", "carried", "caught",
    "chased", "closed", "collided", "digging", "dropped", "entered", "exchanged",
    "exited", "fell", "fled", "flew", "followed", "gave", "got", "had", "handed",
    "hauled", "held", "hit", "jumped", "kicked", "left", "lifted", "moved", "opened",
    "passed", "picked", "pushed", "put", "raised", "ran", "received", "replaced",
    "snatched", "stopped", "threw", "took", "touched", "turned", "walked", "went",
)


def is_person(object_class):
    return object_class in PERSON_MODELS
