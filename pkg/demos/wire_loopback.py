#!/usr/bin/env python3
"""Full UDP round trip on loopback: paced coded sender, decoding receiver.

The sender paces chunk datagrams through a drop-and-delay shim; the
receiver decodes samples, scores monitoring intervals, and mails feedback
that repaces the sender.  Run it as one script here, or in two terminals
with the CLI:

    agefec wire-recv --listen 127.0.0.1:9000
    agefec wire-send --dest 127.0.0.1:9000 --samples 400 --drop-shim 0.05
"""

import socket
import threading
import time

from agefec.wire import WireConfig, run_receiver, run_sender


def main() -> None:
    recv_sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    recv_sock.bind(("127.0.0.1", 0))
    stop = threading.Event()
    config = WireConfig(
        dest=recv_sock.getsockname(),
        k=3,
        n_init=5,
        avt_ms=100,
        payload_bytes=256,
        samples=400,
        drop_shim=0.05,
        delay_shim_ms=10.0,
        shim_seed=1,
    )
    result = {}

    def recv_main():
        result["log"] = run_receiver(config, stop=stop, sock=recv_sock)

    thread = threading.Thread(target=recv_main)
    thread.start()
    try:
        send_log = run_sender(config)
        time.sleep(0.4)
    finally:
        stop.set()
        thread.join(timeout=5.0)
        recv_sock.close()
    log = result["log"]

    print(
        f"sender: {send_log.samples_sent} samples, {send_log.chunks_sent} chunks "
        f"sent, {send_log.shim_dropped} shim-dropped, "
        f"{send_log.feedback_applied} feedback updates applied"
    )
    print(
        f"sender final pacing: {send_log.final_sigma:.3f} chunks/slot, "
        f"n={send_log.final_n}, one sample per {send_log.final_ts_ms} ms"
    )
    print(
        f"receiver: {log.chunks_received} chunks, {log.decoded_samples} samples "
        f"decoded ({log.payload_ok} byte-exact), mean delay {log.mean_delay_ms:.2f} ms "
        f"(shim adds 10 ms), {log.feedback_sent} feedback packets"
    )
    if log.rows:
        mi, sigma, n, t_s = log.rows[-1][:4]
        print(
            f"receiver controller after {mi} intervals: sigma={sigma:.3f}, "
            f"n={n}, t_s={t_s} slot(s)"
        )


if __name__ == "__main__":
    main()
