import json
import os
import tempfile
import uuid

from dotenv import load_dotenv
from flask import Flask, jsonify, request
from flask_cors import CORS

from runner import COMMANDS, execute
from utils.errors import BlowUpError, BridgeSimError, NumericalError, ParameterError
from utils.logging_setup import configure_logging
from utils.sim_config import parse_config

load_dotenv()
configure_logging()

app = Flask(__name__)
CORS(app, resources={r"/*": {"origins": os.getenv("ALLOWED_ORIGINS", "*")}})


@app.route("/health", methods=["GET"])
def health_check():
    return jsonify({"status": "ok"})


def error_status(error: Exception) -> int:
    if isinstance(error, ParameterError):
        return 400
    if isinstance(error, (NumericalError, BlowUpError)):
        return 422
    return 500


def read_run_request():
    payload = request.get_json(silent=True)
    if not isinstance(payload, dict):
        raise ParameterError("Request body must be a JSON object.")

    command = payload.get("command")
    if command not in COMMANDS:
        raise ParameterError(f"command must be one of {sorted(COMMANDS)}, got {command!r}")

    config_text = payload.get("config", "")
    if not isinstance(config_text, str):
        raise ParameterError("config must be the configuration document as a string.")
    return command, parse_config(config_text)


def collect_outputs(directory, files):
    outputs = {}
    for name in files:
        if name.endswith(".json"):
            with open(os.path.join(directory, name), "r", encoding="utf-8") as f:
                outputs[name] = json.load(f)
        else:
            outputs[name] = None
    return outputs


@app.route("/runs", methods=["POST"])
def create_run():
    run_id = str(uuid.uuid4())
    print(f"[INFO] Run started: {run_id}")

    try:
        command, config = read_run_request()
    except BridgeSimError as e:
        print(f"[ERROR] Bad request: {e}")
        return jsonify({"error": str(e), "exit_code": e.exit_code}), 400

    with tempfile.TemporaryDirectory() as tmpdir:
        try:
            manifest = execute(command, config, tmpdir)
            outputs = collect_outputs(tmpdir, manifest["files"])
        except BridgeSimError as e:
            print(f"[ERROR] Run {run_id} failed: {e}")
            return jsonify({"error": str(e), "exit_code": e.exit_code}), error_status(e)
        except Exception as e:
            print(f"[ERROR] Run {run_id} failed unexpectedly: {e}")
            return jsonify({"error": f"Run failed: {str(e)}", "exit_code": 1}), 500

    print(f"[INFO] Run complete: {run_id} ({command})")
    return jsonify({"run_id": run_id, "command": command, "manifest": manifest, "outputs": outputs})


if __name__ == "__main__":
    port = int(os.getenv("PORT", "5000"))
    app.run(host="0.0.0.0", port=port)
