from typing import Dict
import os
import json

RESOURCES = os.path.join("cdsclear", "resources")


def project_root():
    return os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def resources_dir() -> str:
    return os.path.join(project_root(), RESOURCES)


def file_path(file_name: str, in_resources: bool = False) -> str:
    if os.path.isabs(file_name):
        return file_name
    return os.path.join(resources_dir() if in_resources else project_root(), file_name)


def load_file(file_name: str, in_resources: bool = False, file_ending: str = None) -> str:
    """ Paths that exist relative to the working directory win over the project and resource directories. """
    if file_ending and not file_name.endswith(file_ending):
        file_name += file_ending
    if not os.path.exists(file_name):
        file_name = file_path(file_name, in_resources)
    with open(file_name, encoding='utf8') as f:
        return f.read()


def load_json(file_name: str, in_resources: bool = False) -> Dict:
    return json.loads(load_file(file_name, in_resources, file_ending=".json"))


def load_resource_json(file_name: str) -> Dict:
    return load_json(file_name, in_resources=True)


def store_file(data, file_name: str, dir_path: str = None) -> str:
    """
    :param data: text, or a dict or list written as indented JSON with sorted keys
    :param file_name: of the file; may carry its own directories when dir_path is None
    :param dir_path: directory to store to, created when missing
    :return: the file path
    """
    fp = file_name if dir_path is None else os.path.join(dir_path, file_name)
    parent = os.path.dirname(os.path.abspath(fp))
    os.makedirs(parent, exist_ok=True)
    with open(fp, "w", encoding='utf-8') as f:
        if isinstance(data, (dict, list)):
            json.dump(data, f, ensure_ascii=False, indent=2, sort_keys=True)
            f.write("\n")
        else:
            f.write(data)
    return fp
