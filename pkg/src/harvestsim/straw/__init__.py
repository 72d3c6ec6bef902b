from .codec import (FRAME_BYTES, HEADER_BYTES, MAX_SPAN, PAYLOAD_BYTES, CodecError, StrawCommand,
                    StrawDataFrame, decode, encode_command, encode_data)
from .protocol import (Route, Session, StrawBase, StrawNode, StrawParams, collection_period,
                       static_routes)
