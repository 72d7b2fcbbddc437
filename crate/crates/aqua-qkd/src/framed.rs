//! Byte-stream transport for the classical channel: Bob drives CASCADE through
//! a [`FramedChannel`], Alice answers with [`serve_alice`].

use std::io::{self, ErrorKind, Read, Write};

use aqua_qkd_core::channel::{AliceEndpoint, ClassicalChannel, FrameError, LeakAccountant, Message, ProtocolError, MAX_FRAME_LEN};

/// Read one frame; `None` on a clean end of stream.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<Message>, ProtocolError> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == ErrorKind::UnexpectedEof => return Ok(None),
        Err(_) => return Err(ProtocolError::Transport),
    }
    let len = u32::from_be_bytes(len);
    if len == 0 {
        return Err(FrameError::Empty.into());
    }
    if len > MAX_FRAME_LEN {
        return Err(FrameError::TooLong(len).into());
    }
    let mut body = vec![0u8; len as usize];
    r.read_exact(&mut body).map_err(|_| ProtocolError::Transport)?;
    Ok(Some(Message::decode_body(&body)?))
}

pub fn write_frame<W: Write>(w: &mut W, msg: &Message) -> io::Result<()> {
    w.write_all(&msg.encode())?;
    w.flush()
}

fn expects_reply(msg: &Message) -> bool {
    matches!(msg, Message::ParityRequest { .. } | Message::VerificationRequest { .. })
}

/// Bob's end of a framed stream.
pub struct FramedChannel<S> {
    stream: S,
    leak: LeakAccountant,
}

impl<S: Read + Write> FramedChannel<S> {
    pub fn new(stream: S) -> Self {
        Self { stream, leak: LeakAccountant::default() }
    }

    pub fn into_inner(self) -> S {
        self.stream
    }
}

impl<S: Read + Write> ClassicalChannel for FramedChannel<S> {
    fn exchange(&mut self, msg: Message) -> Result<Option<Message>, ProtocolError> {
        self.leak.record(&msg);
        write_frame(&mut self.stream, &msg).map_err(|_| ProtocolError::Transport)?;
        if !expects_reply(&msg) {
            return Ok(None);
        }
        let reply = read_frame(&mut self.stream)?.ok_or(ProtocolError::Transport)?;
        self.leak.record(&reply);
        Ok(Some(reply))
    }

    fn leak(&self) -> LeakAccountant {
        self.leak
    }
}

/// Answer Bob's requests until he closes the stream.
pub fn serve_alice<S: Read + Write>(mut stream: S, mut alice: AliceEndpoint) -> Result<AliceEndpoint, ProtocolError> {
    while let Some(msg) = read_frame(&mut stream)? {
        if let Some(reply) = alice.handle(msg)? {
            write_frame(&mut stream, &reply).map_err(|_| ProtocolError::Transport)?;
        }
    }
    Ok(alice)
}
